//! Built-in benchmark problems.

pub const K33: &str = include_str!("../problems/k33.pdsp");
pub const DODECAGON: &str = include_str!("../problems/dodecagon.pdsp");
pub const ICOSAHEDRON: &str = include_str!("../problems/icosahedron.pdsp");
pub const OCTAHEDRON: &str = include_str!("../problems/octahedron.pdsp");
pub const DISULFIDE: &str = include_str!("../problems/disulfide.pdsp");

pub fn all() -> &'static [(&'static str, &'static str)] {
    &[
        ("k33", K33),
        ("octahedron", OCTAHEDRON),
        ("disulfide", DISULFIDE),
        ("dodecagon", DODECAGON),
        ("icosahedron", ICOSAHEDRON),
    ]
}

pub fn by_name(name: &str) -> Option<&'static str> {
    all().iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
