//! Plain-text model checkpoints.
//!
//! ```text
//! speechpinn-checkpoint 1
//! unknown period
//! period_s 6.1e-3
//! p_s_pa 7.85e2
//! harmonics 12
//! scales 1e-3 1e3 1e-3
//! units 1e-3 1e2
//! smoothing 5e4 5e4 5e-2
//! length_m 1.6e-1
//! network fold 24 64 2 2 1e0
//! <one value per line, tensors in order, row-major>
//! network tract 25 64 3 2 1e0
//! <values>
//! end
//! ```
//!
//! Numbers use shortest round-trip formatting, so a saved model reloads
//! bit-identically.

use std::path::Path;

use ndarray::Array2;

use super::model::{OutputScales, PinnModel, Unknown};
use super::network::{Network, NetworkShape};
use crate::error::{Error, Result};
use crate::io::format_number;
use crate::params::SmoothingCoefficients;

const MAGIC: &str = "speechpinn-checkpoint";
const VERSION: u32 = 1;

pub fn to_text(model: &PinnModel) -> String {
    let f = format_number;
    let mut s = format!("{MAGIC} {VERSION}\n");
    s += &format!("unknown {}\n", model.unknown.name());
    s += &format!("period_s {}\n", f(model.period));
    s += &format!("p_s_pa {}\n", f(model.p_s));
    s += &format!("harmonics {}\n", model.harmonics);
    let sc = &model.scales;
    s += &format!("scales {} {} {}\n", f(sc.x), f(sc.p), f(sc.u));
    s += &format!("units {} {}\n", f(model.period_unit), f(model.pressure_unit));
    let sm = &model.smoothing;
    s += &format!("smoothing {} {} {}\n", f(sm.beta_ag), f(sm.beta_f), f(sm.beta_p));
    s += &format!("length_m {}\n", f(model.length));
    for (name, net) in [("fold", &model.fold), ("tract", &model.tract)] {
        let sh = net.shape;
        s += &format!(
            "network {name} {} {} {} {} {}\n",
            sh.inputs,
            sh.width,
            sh.blocks,
            sh.outputs,
            f(net.snake_a)
        );
        for t in &net.tensors {
            for v in t.iter() {
                s += &f(*v);
                s.push('\n');
            }
        }
    }
    s += "end\n";
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.it.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(Error::Format("checkpoint ends early".into()))
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next()?;
        let mut fields = l.split_whitespace();
        if fields.next() != Some(key) {
            return Err(Error::Format(format!("line {n}: expected `{key}`")));
        }
        Ok((n, fields.collect()))
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("line {line}: `{s}` is not a valid number")))
}

fn numbers(line: usize, fields: &[&str], n: usize) -> Result<Vec<f64>> {
    if fields.len() != n {
        return Err(Error::Format(format!("line {line}: expected {n} values")));
    }
    fields.iter().map(|f| num(line, f)).collect()
}

fn read_network(lines: &mut Lines<'_>, name: &str) -> Result<Network> {
    let (n, fields) = lines.keyed("network")?;
    if fields.len() != 6 || fields[0] != name {
        return Err(Error::Format(format!("line {n}: expected `network {name}` with 5 sizes")));
    }
    let shape = NetworkShape {
        inputs: num(n, fields[1])?,
        width: num(n, fields[2])?,
        blocks: num(n, fields[3])?,
        outputs: num(n, fields[4])?,
    };
    let snake_a = num(n, fields[5])?;
    let mut tensors = Vec::new();
    for (r, c) in shape.tensor_shapes() {
        let mut vals = Vec::with_capacity(r * c);
        for _ in 0..r * c {
            let (n, l) = lines.next()?;
            vals.push(num(n, l)?);
        }
        tensors.push(Array2::from_shape_vec((r, c), vals).expect("sized above"));
    }
    Ok(Network {
        shape,
        snake_a,
        tensors,
    })
}

pub fn from_text(text: &str) -> Result<PinnModel> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
    };
    let (n, head) = lines.keyed(MAGIC)?;
    let version: u32 = num(n, head.first().copied().unwrap_or(""))?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let (n, f) = lines.keyed("unknown")?;
    let unknown = match f.as_slice() {
        ["period"] => Unknown::Period,
        ["pressure"] => Unknown::Pressure,
        _ => return Err(Error::Format(format!("line {n}: unknown must be period or pressure"))),
    };
    let (n, f) = lines.keyed("period_s")?;
    let period = numbers(n, &f, 1)?[0];
    let (n, f) = lines.keyed("p_s_pa")?;
    let p_s = numbers(n, &f, 1)?[0];
    let (n, f) = lines.keyed("harmonics")?;
    let harmonics: usize = num(n, f.first().copied().unwrap_or(""))?;
    let (n, f) = lines.keyed("scales")?;
    let sc = numbers(n, &f, 3)?;
    let (n, f) = lines.keyed("units")?;
    let units = numbers(n, &f, 2)?;
    let (n, f) = lines.keyed("smoothing")?;
    let sm = numbers(n, &f, 3)?;
    let (n, f) = lines.keyed("length_m")?;
    let length = numbers(n, &f, 1)?[0];
    let fold = read_network(&mut lines, "fold")?;
    let tract = read_network(&mut lines, "tract")?;
    lines.keyed("end")?;
    if fold.shape.inputs != 2 * harmonics || tract.shape.inputs != 2 * harmonics + 1 {
        return Err(Error::Format("network inputs do not match harmonics".into()));
    }
    Ok(PinnModel {
        fold,
        tract,
        unknown,
        period,
        p_s,
        harmonics,
        scales: OutputScales {
            x: sc[0],
            p: sc[1],
            u: sc[2],
        },
        period_unit: units[0],
        pressure_unit: units[1],
        smoothing: SmoothingCoefficients {
            beta_ag: sm[0],
            beta_f: sm[1],
            beta_p: sm[2],
        },
        length,
    })
}

pub fn save(model: &PinnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<PinnModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
