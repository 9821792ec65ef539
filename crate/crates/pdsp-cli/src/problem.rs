//! The line-oriented problem file format: points, distance constraints,
//! sketch coordinates, target values, an optional explicit plan, and
//! configuration overrides. Files are diff-friendly and hand-editable.

use pdsp_core::cplan::{
    decompose_sss, derive_rcp_greedy, validate_rcp, DrivingParam, Instruction, ObjRef, ParamRef,
    Rcp, RefPoint, Site,
};
use pdsp_core::geometry::Point;
use pdsp_core::homotopy::{make_interpolation, Interpolation};
use pdsp_core::model::{
    fix_reference, measure_params, reference_frame, Constraint, Dim, Figure, ParamValues, Pdsp,
};
use pdsp_core::tracker::TrackerConfig;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Build(String),
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T, ProblemError> {
    Err(ProblemError::Parse { line, msg: msg.into() })
}

/// How a parameter's target value is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Value(f64),
    /// Keep the sketch-measured value.
    Measure,
    /// Sketch-measured value times a factor.
    Scale(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcpLine {
    pub kind: String,
    pub out: String,
    pub args: Vec<String>,
}

/// A parsed problem file, close to its textual form.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub dim: Dim,
    pub points: Vec<String>,
    /// (param, point, point) in declaration order.
    pub dists: Vec<(String, String, String)>,
    pub sketch: BTreeMap<String, Point>,
    pub targets: BTreeMap<String, Target>,
    /// Fresh reference points of an explicit plan, in the sketch frame.
    pub refpoints: Vec<(String, Point)>,
    pub rcp_lines: Vec<RcpLine>,
    pub removed: Vec<String>,
    pub config: BTreeMap<String, f64>,
}

const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "delta_min",
    "delta_max",
    "fd_step",
    "quad_c",
    "eps_newton",
    "eps_loop",
    "max_newton",
    "max_iterations",
];

pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let mut dim: Option<Dim> = None;
    let mut points = Vec::new();
    let mut dists = Vec::new();
    let mut sketch = BTreeMap::new();
    let mut targets = BTreeMap::new();
    let mut refpoints = Vec::new();
    let mut rcp_lines = Vec::new();
    let mut removed = Vec::new();
    let mut config = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        let coords = |tok: &[&str], want: usize| -> Result<Point, ProblemError> {
            if tok.len() != want {
                return perr(line, format!("expected {want} coordinates"));
            }
            let mut v = [0.0; 3];
            for (i, s) in tok.iter().enumerate() {
                v[i] = s
                    .parse::<f64>()
                    .map_err(|_| ProblemError::Parse { line, msg: format!("bad number {s}") })?;
            }
            Ok(Point::new(v[0], v[1], v[2]))
        };
        match tok[0] {
            "dim" => {
                if tok.len() != 2 {
                    return perr(line, "dim takes one value");
                }
                dim = Some(match tok[1] {
                    "2" => Dim::Two,
                    "3" => Dim::Three,
                    other => return perr(line, format!("dim must be 2 or 3, got {other}")),
                });
            }
            "point" => {
                if tok.len() != 2 {
                    return perr(line, "point takes one name");
                }
                if points.contains(&tok[1].to_string()) {
                    return perr(line, format!("duplicate point {}", tok[1]));
                }
                points.push(tok[1].to_string());
            }
            "dist" => {
                if tok.len() != 4 {
                    return perr(line, "dist takes a parameter and two points");
                }
                if dists.iter().any(|(a, _, _): &(String, _, _)| a == tok[1]) {
                    return perr(line, format!("duplicate parameter {}", tok[1]));
                }
                dists.push((tok[1].to_string(), tok[2].to_string(), tok[3].to_string()));
            }
            "sketch" => {
                let d = dim.ok_or(ProblemError::Parse {
                    line,
                    msg: "dim must come before sketch".into(),
                })?;
                if tok.len() != 2 + d.coords() {
                    return perr(line, "sketch takes a point and its coordinates");
                }
                let p = coords(&tok[2..], d.coords())?;
                sketch.insert(tok[1].to_string(), p);
            }
            "target" => {
                if tok.len() != 3 {
                    return perr(line, "target takes a parameter and a value");
                }
                let t = if tok[2] == "measure" {
                    Target::Measure
                } else if let Some(f) = tok[2].strip_prefix("scale:") {
                    Target::Scale(f.parse().map_err(|_| ProblemError::Parse {
                        line,
                        msg: format!("bad scale factor {f}"),
                    })?)
                } else {
                    Target::Value(tok[2].parse().map_err(|_| ProblemError::Parse {
                        line,
                        msg: format!("bad target value {}", tok[2]),
                    })?)
                };
                targets.insert(tok[1].to_string(), t);
            }
            "refpoint" => {
                let d = dim.ok_or(ProblemError::Parse {
                    line,
                    msg: "dim must come before refpoint".into(),
                })?;
                if tok.len() != 2 + d.coords() {
                    return perr(line, "refpoint takes a name and its coordinates");
                }
                let p = coords(&tok[2..], d.coords())?;
                refpoints.push((tok[1].to_string(), p));
            }
            "rcp" => {
                if tok.len() < 4 {
                    return perr(line, "rcp takes a kind, an output and arguments");
                }
                let kind = tok[1].to_lowercase();
                let arity = match kind.as_str() {
                    "intercl" | "intersl" => 2,
                    "intercc" | "interssp" => 4,
                    "intersss" => 6,
                    other => return perr(line, format!("unknown instruction kind {other}")),
                };
                if tok.len() != 3 + arity {
                    return perr(line, format!("{kind} takes {arity} arguments"));
                }
                rcp_lines.push(RcpLine {
                    kind,
                    out: tok[2].to_string(),
                    args: tok[3..].iter().map(|s| s.to_string()).collect(),
                });
            }
            "remove" => {
                if tok.len() != 2 {
                    return perr(line, "remove takes one parameter");
                }
                removed.push(tok[1].to_string());
            }
            "config" => {
                if tok.len() != 3 {
                    return perr(line, "config takes a key and a value");
                }
                if !CONFIG_KEYS.contains(&tok[1]) {
                    return perr(line, format!("unknown config key {}", tok[1]));
                }
                let v: f64 = tok[2].parse().map_err(|_| ProblemError::Parse {
                    line,
                    msg: format!("bad config value {}", tok[2]),
                })?;
                config.insert(tok[1].to_string(), v);
            }
            other => return perr(line, format!("unknown directive {other}")),
        }
    }

    let dim = dim.ok_or(ProblemError::Parse { line: 0, msg: "missing dim".into() })?;
    Ok(Problem { dim, points, dists, sketch, targets, refpoints, rcp_lines, removed, config })
}

fn fmt_f(v: f64) -> String {
    // shortest representation that round-trips
    let s = format!("{v}");
    s
}

pub fn serialize_problem(p: &Problem) -> String {
    let mut out = String::new();
    let d = match p.dim {
        Dim::Two => 2,
        Dim::Three => 3,
    };
    out.push_str(&format!("dim {d}\n"));
    for pt in &p.points {
        out.push_str(&format!("point {pt}\n"));
    }
    for (a, x, y) in &p.dists {
        out.push_str(&format!("dist {a} {x} {y}\n"));
    }
    for pt in &p.points {
        if let Some(c) = p.sketch.get(pt) {
            match p.dim {
                Dim::Two => out.push_str(&format!("sketch {pt} {} {}\n", fmt_f(c.x), fmt_f(c.y))),
                Dim::Three => out.push_str(&format!(
                    "sketch {pt} {} {} {}\n",
                    fmt_f(c.x),
                    fmt_f(c.y),
                    fmt_f(c.z)
                )),
            }
        }
    }
    for (a, t) in &p.targets {
        match t {
            Target::Value(v) => out.push_str(&format!("target {a} {}\n", fmt_f(*v))),
            Target::Measure => out.push_str(&format!("target {a} measure\n")),
            Target::Scale(f) => out.push_str(&format!("target {a} scale:{}\n", fmt_f(*f))),
        }
    }
    for (name, c) in &p.refpoints {
        match p.dim {
            Dim::Two => out.push_str(&format!("refpoint {name} {} {}\n", fmt_f(c.x), fmt_f(c.y))),
            Dim::Three => out.push_str(&format!(
                "refpoint {name} {} {} {}\n",
                fmt_f(c.x),
                fmt_f(c.y),
                fmt_f(c.z)
            )),
        }
    }
    for r in &p.rcp_lines {
        out.push_str(&format!("rcp {} {} {}\n", r.kind, r.out, r.args.join(" ")));
    }
    for a in &p.removed {
        out.push_str(&format!("remove {a}\n"));
    }
    for (k, v) in &p.config {
        out.push_str(&format!("config {k} {}\n", fmt_f(*v)));
    }
    out
}

/// Everything the solver needs, with the sketch in reference position.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub pdsp: Pdsp,
    pub sketch: Figure,
    pub a_sk: ParamValues,
    pub a_so: ParamValues,
    pub interp: Interpolation,
    pub rcp: Rcp,
    pub config: TrackerConfig,
}

impl Problem {
    pub fn build(&self) -> Result<BuiltProblem, ProblemError> {
        let bad = |msg: String| ProblemError::Build(msg);
        let params: Vec<String> = self.dists.iter().map(|(a, _, _)| a.clone()).collect();
        let mut constraints = Vec::new();
        for (a, x, y) in &self.dists {
            let find = |n: &String| {
                self.points
                    .iter()
                    .position(|p| p == n)
                    .ok_or_else(|| bad(format!("constraint {a} references unknown point {n}")))
            };
            constraints.push(Constraint {
                param: params.iter().position(|p| p == a).unwrap(),
                a: find(x)?,
                b: find(y)?,
            });
        }
        let pdsp = Pdsp::new(self.dim, self.points.clone(), params.clone(), constraints)
            .map_err(|e| bad(e.to_string()))?;

        let mut raw = Vec::with_capacity(self.points.len());
        for p in &self.points {
            raw.push(*self.sketch.get(p).ok_or_else(|| bad(format!("no sketch for {p}")))?);
        }
        let raw = Figure(raw);
        let frame = reference_frame(&pdsp, &raw).map_err(|e| bad(e.to_string()))?;
        let sketch = fix_reference(&pdsp, &raw).map_err(|e| bad(e.to_string()))?;

        let a_sk = measure_params(&pdsp, &sketch).map_err(|e| bad(e.to_string()))?;
        let mut a_so = a_sk.clone();
        for (name, target) in &self.targets {
            let i = params
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| bad(format!("target for unknown parameter {name}")))?;
            a_so.0[i] = match target {
                Target::Value(v) => *v,
                Target::Measure => a_sk.0[i],
                Target::Scale(f) => f * a_sk.0[i],
            };
        }

        let quad_c = self.config.get("quad_c").copied().unwrap_or(2.0);
        let interp =
            make_interpolation(&a_sk, &a_so, quad_c).map_err(|e| bad(e.to_string()))?;

        let rcp = if self.rcp_lines.is_empty() {
            if !self.removed.is_empty() || !self.refpoints.is_empty() {
                return Err(bad("remove/refpoint lines without an rcp section".into()));
            }
            derive_rcp_greedy(&pdsp, &sketch).map_err(|e| bad(e.to_string()))?
        } else {
            self.build_rcp(&pdsp, &sketch, &frame)?
        };
        validate_rcp(&rcp, &pdsp).map_err(|e| bad(e.to_string()))?;

        let mut config = TrackerConfig::reduced();
        for (k, v) in &self.config {
            match k.as_str() {
                "alpha" => config.alpha = *v,
                "delta_min" => config.delta_min = *v,
                "delta_max" => config.delta_max = *v,
                "fd_step" => config.fd_step = *v,
                "eps_newton" => config.eps_newton = *v,
                "eps_loop" => config.loop_tol_rel = *v,
                "max_newton" => config.max_newton = *v as usize,
                "max_iterations" => config.max_iterations = *v as u64,
                "quad_c" => {}
                other => return Err(bad(format!("unknown config key {other}"))),
            }
        }

        Ok(BuiltProblem { pdsp, sketch, a_sk, a_so, interp, rcp, config })
    }

    fn build_rcp(
        &self,
        pdsp: &Pdsp,
        sketch: &Figure,
        frame: &pdsp_core::model::ReferenceFrame,
    ) -> Result<Rcp, ProblemError> {
        let bad = |msg: String| ProblemError::Build(msg);
        // fresh reference points, mapped into the canonical frame
        let mut reference: Vec<RefPoint> = Vec::new();
        let mut driving: Vec<DrivingParam> = Vec::new();
        let mut next_id = 0u32;
        for (name, pos) in &self.refpoints {
            reference.push(RefPoint {
                id: next_id,
                name: name.clone(),
                pos: frame.to_canonical(*pos),
            });
            next_id += 1;
        }

        let point_of = |n: &str| pdsp.point_id(n);
        let param_of = |n: &str| pdsp.param_id(n);
        let resolve_center = |n: &str| -> Result<ObjRef, ProblemError> {
            if let Some(p) = point_of(n) {
                return Ok(ObjRef::Point(p));
            }
            reference
                .iter()
                .find(|r| r.name == n)
                .map(|r| ObjRef::Ref(r.id))
                .ok_or_else(|| bad(format!("unknown center {n} (missing refpoint line?)")))
        };

        let mut instructions = Vec::new();
        let mut circles = 0usize;
        for line in &self.rcp_lines {
            let out = point_of(&line.out)
                .ok_or_else(|| bad(format!("instruction output {} is not a point", line.out)))?;
            let mut site = |ci: usize, ri: usize| -> Result<Site, ProblemError> {
                let center = resolve_center(&line.args[ci])?;
                let radius = match param_of(&line.args[ri]) {
                    Some(a) => ParamRef::Model(a),
                    None => {
                        // implicit driving parameter
                        let id = match driving.iter().find(|d| d.name == line.args[ri]) {
                            Some(d) => d.id,
                            None => {
                                let id = next_id;
                                next_id += 1;
                                let value = match center {
                                    ObjRef::Ref(r) => {
                                        let rp = reference.iter().find(|e| e.id == r).unwrap();
                                        (sketch.0[out] - rp.pos).norm()
                                    }
                                    ObjRef::Point(p) => (sketch.0[out] - sketch.0[p]).norm(),
                                };
                                driving.push(DrivingParam {
                                    id,
                                    name: line.args[ri].clone(),
                                    value,
                                });
                                id
                            }
                        };
                        ParamRef::Driving(id)
                    }
                };
                Ok(Site::new(center, radius))
            };
            match line.kind.as_str() {
                "intercl" => {
                    let s = site(0, 1)?;
                    instructions.push(Instruction::InterCL { out, site: s });
                }
                "intersl" => {
                    let s = site(0, 1)?;
                    instructions.push(Instruction::InterSL { out, site: s });
                }
                "intercc" => {
                    let first = site(0, 1)?;
                    let second = site(2, 3)?;
                    instructions.push(Instruction::InterCC { out, first, second });
                }
                "interssp" => {
                    let first = site(0, 1)?;
                    let second = site(2, 3)?;
                    instructions.push(Instruction::InterSSP { out, first, second });
                }
                "intersss" => {
                    let s1 = site(0, 1)?;
                    let s2 = site(2, 3)?;
                    let s3 = site(4, 5)?;
                    let (ss, cs) = decompose_sss(out, circles, s1, s2, s3);
                    circles += 1;
                    instructions.push(ss);
                    instructions.push(cs);
                }
                other => return Err(bad(format!("unknown instruction kind {other}"))),
            }
        }

        let mut removed = Vec::new();
        for name in &self.removed {
            let a = param_of(name)
                .ok_or_else(|| bad(format!("removed parameter {name} is unknown")))?;
            let cid = pdsp
                .constraints
                .iter()
                .position(|c| c.param == a)
                .ok_or_else(|| bad(format!("parameter {name} has no constraint")))?;
            removed.push(cid);
        }
        removed.sort_unstable();

        Ok(Rcp::new(pdsp.dim, instructions, removed, driving, reference))
    }
}
