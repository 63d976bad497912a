//! Reading statistic files (`id,t,sigma[,n_i]` or `id,t,m,n[,n_i]`) and
//! raw measurement files (`feature_id,group,value`).

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use nmwl::families::reduce_two_sample;
use nmwl::{Comparisons, Family, Observation};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyChoice {
    Normal,
    #[value(name = "folded-t")]
    FoldedT,
}

impl FamilyChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "normal" => Ok(FamilyChoice::Normal),
            "folded-t" => Ok(FamilyChoice::FoldedT),
            other => Err(CliError::Input(format!("family must be normal or folded-t, got {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyChoice::Normal => "normal",
            FamilyChoice::FoldedT => "folded-t",
        }
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn field<V: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, at: &str) -> CliResult<V> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| CliError::Input(format!("{at}: {name} is not a valid number: {raw:?}")))
}

/// Parses a statistic file. The family comes from the header unless
/// `family` forces one; `default_n` fills a missing `n_i` for normal rows.
pub fn read_statistics<R: Read>(
    src: R,
    label: &str,
    family: Option<FamilyChoice>,
    default_n: Option<u64>,
) -> CliResult<(Comparisons, FamilyChoice)> {
    let mut rdr = reader(src);
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("{label}: {e}")))?.clone();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Input(format!("{label}: file is empty")));
    }
    let (id, t) = match (column(&headers, "id"), column(&headers, "t")) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CliError::Input(format!(
                "{label}: header must contain id and t columns, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )))
        }
    };
    let sigma = column(&headers, "sigma");
    let (m, n) = (column(&headers, "m"), column(&headers, "n"));
    let n_i = column(&headers, "n_i");
    let detected = match (sigma, m, n) {
        (Some(_), None, None) => FamilyChoice::Normal,
        (None, Some(_), Some(_)) => FamilyChoice::FoldedT,
        _ => return Err(CliError::Input(format!("{label}: header needs either a sigma column or m and n columns"))),
    };
    if let Some(f) = family {
        if f != detected {
            return Err(CliError::Input(format!(
                "{label}: --family {} does not match the {} columns in the header",
                f.name(),
                detected.name()
            )));
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("{label}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let name = rec.get(id).unwrap_or("").to_string();
        let at = format!("{label} line {line} (id {name:?})");
        if name.is_empty() {
            return Err(CliError::Input(format!("{at}: id is empty")));
        }
        if !seen.insert(name.clone()) {
            return Err(CliError::Input(format!("{at}: duplicate id")));
        }
        let stat: f64 = field(&rec, t, "t", &at)?;
        if !stat.is_finite() {
            return Err(CliError::Input(format!("{at}: t must be finite")));
        }
        let fam = match detected {
            FamilyChoice::Normal => {
                let s: f64 = field(&rec, sigma.expect("sigma column"), "sigma", &at)?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(CliError::Input(format!("{at}: sigma must be positive, got {s}")));
                }
                Family::normal(s)
            }
            FamilyChoice::FoldedT => {
                let gm: u32 = field(&rec, m.expect("m column"), "m", &at)?;
                let gn: u32 = field(&rec, n.expect("n column"), "n", &at)?;
                if stat < 0.0 {
                    return Err(CliError::Input(format!("{at}: a folded t statistic must be non-negative, got {stat}")));
                }
                Family::folded_t(gm, gn)
            }
        }
        .map_err(|e| CliError::Input(format!("{at}: {e}")))?;
        let mut o = Observation::new(name, stat, fam).map_err(|e| CliError::Input(format!("{at}: {e}")))?;
        let size = match n_i {
            Some(c) if !rec.get(c).unwrap_or("").is_empty() => Some(field::<u64>(&rec, c, "n_i", &at)?),
            _ if detected == FamilyChoice::Normal => default_n,
            _ => None,
        };
        if let Some(s) = size {
            o = o.with_sample_size(s).map_err(|e| CliError::Input(format!("{at}: {e}")))?;
        }
        out.push(o);
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{label}: no comparisons found")));
    }
    Ok((Comparisons::new(out)?, detected))
}

/// Case and control values of one feature.
pub type Groups = (Vec<f64>, Vec<f64>);

/// Per-feature case/control values, in feature-id order.
pub fn read_raw<R: Read>(src: R, label: &str) -> CliResult<BTreeMap<String, Groups>> {
    let mut rdr = reader(src);
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("{label}: {e}")))?.clone();
    let cols = ["feature_id", "group", "value"].map(|c| column(&headers, c));
    let [Some(fid), Some(grp), Some(val)] = cols else {
        return Err(CliError::Input(format!("{label}: header must contain feature_id, group and value columns")));
    };
    let mut groups: BTreeMap<String, Groups> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("{label}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = format!("{label} line {line}");
        let id = rec.get(fid).unwrap_or("");
        if id.is_empty() {
            return Err(CliError::Input(format!("{at}: feature_id is empty")));
        }
        let v: f64 = field(&rec, val, "value", &at)?;
        if !v.is_finite() {
            return Err(CliError::Input(format!("{at}: value must be finite")));
        }
        let entry = groups.entry(id.to_string()).or_default();
        match rec.get(grp).unwrap_or("") {
            "case" => entry.0.push(v),
            "control" => entry.1.push(v),
            other => return Err(CliError::Input(format!("{at}: group must be case or control, got {other:?}"))),
        }
    }
    if groups.is_empty() {
        return Err(CliError::Input(format!("{label}: no measurements found")));
    }
    Ok(groups)
}

/// Two-sample statistics for every feature. Features that cannot be reduced
/// are all reported together.
pub fn reduce(groups: &BTreeMap<String, Groups>) -> CliResult<Comparisons> {
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (id, (case, control)) in groups {
        match reduce_two_sample(id.clone(), case, control) {
            Ok(o) => out.push(o),
            Err(e) => bad.push(format!("{id}: {e}")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Input(format!("cannot reduce {} feature(s): {}", bad.len(), bad.join("; "))));
    }
    Ok(Comparisons::new(out)?)
}
