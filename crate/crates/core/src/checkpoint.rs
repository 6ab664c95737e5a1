//! Plain-text checkpoints.
//!
//! ```text
//! NARA-CKPT v1
//! meta <key> <value>
//! config <key>=<value>
//! param <name> <rank> <dims…>
//! <values of one row, space separated>
//! …
//! end
//! ```
//!
//! Values are written with 17 significant digits, so a save/load/save cycle
//! reproduces the file byte for byte.

use crate::ar::ArModel;
use crate::bundle::{ModelBundle, ModelShape, TrainedFlags};
use crate::confidence::{CalibrationMode, ConfidenceNet, ThresholdCalibration};
use crate::data::Standardizer;
use crate::error::{NaraError, Result};
use crate::prior::PriorPredictor;
use crate::tensor::{Parameters, Tensor};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const HEADER: &str = "NARA-CKPT v1";
const MAGIC: &str = "NARA-CKPT";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn err(msg: impl Into<String>) -> NaraError {
    NaraError::Checkpoint(msg.into())
}

fn push_params<P: Parameters>(out: &mut String, prefix: &str, p: &P) {
    for (name, t) in p.named_tensors() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "param {prefix}.{name} {} {}", t.rank(), dims.join(" "));
        let row = t.shape().last().copied().unwrap_or(1).max(1);
        for chunk in t.data().chunks(row) {
            let vals: Vec<String> = chunk.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
    }
}

pub fn to_text(b: &ModelBundle) -> String {
    let shape = b.shape();
    let c = &b.calibration;
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let mut meta = |k: &str, v: String| {
        let _ = writeln!(out, "meta {k} {v}");
    };
    meta("shape.context_len", shape.context_len.to_string());
    meta("shape.chunk_len", shape.chunk_len.to_string());
    meta("shape.hidden", shape.hidden.to_string());
    meta("shape.layers", shape.layers.to_string());
    meta("shape.conf_hidden", shape.conf_hidden.to_string());
    meta("standardizer.mean", fmt_f64(b.standardizer.mean));
    meta("standardizer.std", fmt_f64(b.standardizer.std));
    meta("trained.ar", b.trained.ar.to_string());
    meta("trained.prior", b.trained.prior.to_string());
    meta("trained.confidence", b.trained.confidence.to_string());
    meta("calibration.mode", c.mode.as_str().to_string());
    meta("calibration.kappa", fmt_f64(c.kappa));
    meta("calibration.level", fmt_f64(c.level));
    meta("calibration.count", c.count.to_string());
    meta("calibration.running_mean", fmt_f64(c.running_mean));
    meta("calibration.threshold", fmt_f64(c.threshold));
    let q: Vec<String> = c.quantiles.iter().map(|&v| fmt_f64(v)).collect();
    meta("calibration.quantiles", format!("{} {}", q.len(), q.join(" ")).trim_end().to_string());
    for (k, v) in &b.config_echo {
        let _ = writeln!(out, "config {k}={v}");
    }
    push_params(&mut out, "ar", &b.ar);
    push_params(&mut out, "prior", &b.prior);
    push_params(&mut out, "confidence", &b.confidence);
    out.push_str("end\n");
    out
}

pub fn save(b: &ModelBundle, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(b))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => err(format!("checkpoint not found: {}", path.display())),
        _ => NaraError::from(e),
    })?;
    from_text(&text)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| err(format!("bad value for {what}: {s:?}")))
}

fn parse_bool(s: &str, what: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(format!("bad boolean for {what}: {s:?}"))),
    }
}

struct Meta(BTreeMap<String, String>);

impl Meta {
    fn get(&self, k: &str) -> Result<&str> {
        self.0.get(k).map(String::as_str).ok_or_else(|| err(format!("missing meta {k}")))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        parse_num(self.get(k)?, k)
    }
}

fn assign<P: Parameters>(prefix: &str, p: &mut P, params: &mut BTreeMap<String, Tensor>) -> Result<()> {
    let names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| format!("{prefix}.{n}")).collect();
    for (name, slot) in names.iter().zip(p.tensors_mut()) {
        let t = params.remove(name).ok_or_else(|| err(format!("missing parameter {name}")))?;
        if t.shape() != slot.shape() {
            return Err(err(format!(
                "parameter {name} has shape {:?}, expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    Ok(())
}

pub fn from_text(text: &str) -> Result<ModelBundle> {
    let mut lines = text.lines().peekable();
    let header = lines.next().ok_or_else(|| err("empty checkpoint"))?;
    if header != HEADER {
        return Err(match header.strip_prefix(MAGIC) {
            Some(v) => err(format!("unsupported checkpoint version {:?}", v.trim())),
            None => err("not a checkpoint file"),
        });
    }

    let mut meta = BTreeMap::new();
    let mut config_echo = Vec::new();
    let mut params: BTreeMap<String, Tensor> = BTreeMap::new();
    let mut ended = false;
    while let Some(line) = lines.next() {
        if line == "end" {
            ended = true;
            break;
        }
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_string(), v.to_string());
        } else if let Some(rest) = line.strip_prefix("config ") {
            let (k, v) = rest.split_once('=').ok_or_else(|| err(format!("bad config line {line:?}")))?;
            config_echo.push((k.to_string(), v.to_string()));
        } else if let Some(rest) = line.strip_prefix("param ") {
            let mut it = rest.split_whitespace();
            let name = it.next().ok_or_else(|| err("param without name"))?.to_string();
            let rank: usize = parse_num(it.next().unwrap_or(""), &name)?;
            let dims = it.map(|d| parse_num::<usize>(d, &name)).collect::<Result<Vec<_>>>()?;
            if dims.len() != rank {
                return Err(err(format!("parameter {name}: rank {rank} but {} dims", dims.len())));
            }
            let n: usize = dims.iter().product();
            let mut data = Vec::with_capacity(n);
            while data.len() < n {
                let row = lines.next().ok_or_else(|| err(format!("parameter {name} truncated")))?;
                for v in row.split_whitespace() {
                    data.push(parse_num::<f64>(v, &name)?);
                }
            }
            if data.len() != n {
                return Err(err(format!("parameter {name}: expected {n} values, found {}", data.len())));
            }
            if params.insert(name.clone(), Tensor::new(dims, data)?).is_some() {
                return Err(err(format!("duplicate parameter {name}")));
            }
        } else {
            return Err(err(format!("unexpected line {line:?}")));
        }
    }
    if !ended {
        return Err(err("missing end marker"));
    }
    let meta = Meta(meta);

    let shape = ModelShape {
        context_len: meta.num("shape.context_len")?,
        chunk_len: meta.num("shape.chunk_len")?,
        hidden: meta.num("shape.hidden")?,
        layers: meta.num("shape.layers")?,
        conf_hidden: meta.num("shape.conf_hidden")?,
    };
    shape.validate()?;
    let mut ar = ArModel::zeros(shape.hidden, shape.layers);
    let mut prior = PriorPredictor::zeros(shape.context_len, shape.chunk_len);
    let mut confidence = ConfidenceNet::zeros(shape.context_len, shape.chunk_len, shape.conf_hidden);
    assign("ar", &mut ar, &mut params)?;
    assign("prior", &mut prior, &mut params)?;
    assign("confidence", &mut confidence, &mut params)?;
    if let Some(extra) = params.keys().next() {
        return Err(err(format!("unknown parameter {extra}")));
    }

    let mut calibration = ThresholdCalibration::new(
        CalibrationMode::parse(meta.get("calibration.mode")?)?,
        meta.num("calibration.kappa")?,
        meta.num("calibration.level")?,
    )?;
    calibration.count = meta.num("calibration.count")?;
    calibration.running_mean = meta.num("calibration.running_mean")?;
    calibration.threshold = meta.num("calibration.threshold")?;
    let mut q = meta.get("calibration.quantiles")?.split_whitespace();
    let nq: usize = parse_num(q.next().unwrap_or(""), "calibration.quantiles")?;
    calibration.quantiles = q.map(|v| parse_num(v, "calibration.quantiles")).collect::<Result<_>>()?;
    if calibration.quantiles.len() != nq {
        return Err(err("calibration.quantiles count mismatch"));
    }

    let bundle = ModelBundle {
        ar,
        prior,
        confidence,
        calibration,
        standardizer: Standardizer {
            mean: meta.num("standardizer.mean")?,
            std: meta.num("standardizer.std")?,
        },
        trained: TrainedFlags {
            ar: parse_bool(meta.get("trained.ar")?, "trained.ar")?,
            prior: parse_bool(meta.get("trained.prior")?, "trained.prior")?,
            confidence: parse_bool(meta.get("trained.confidence")?, "trained.confidence")?,
        },
        config_echo,
    };
    bundle.validate()?;
    Ok(bundle)
}
