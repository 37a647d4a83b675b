//! Solution archives: a directory holding `meta.json`, `policy.csv` and
//! one `values_<k>.csv` per objective.
//!
//! `meta.json` embeds the (effective) scenario, so reading an archive
//! rebuilds the product deterministically and then fills the tables from
//! the CSV files. Floats are written in shortest round-trip form, so the
//! tables read back bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::file::{canonical_json, from_json_text, Model, ScenarioFile};
use crate::lex::{Epsilon, LambdaSpace, LexSolution};
use crate::mdp::{ActionId, Aggregation};
use crate::product::{ProductState, ProductSystem};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveConfig {
    pub horizon: usize,
    pub c_fail: f64,
    /// Absolute slack, or `null` for the automatic one.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveDimensions {
    pub horizon_layers: usize,
    pub product_states: usize,
    pub automaton_states: usize,
    pub lambda_sizes: Vec<usize>,
    pub objectives: usize,
    pub augmented_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveMeta {
    pub format: u32,
    pub solver_version: String,
    pub config: ArchiveConfig,
    pub dimensions: ArchiveDimensions,
    pub aggregations: Vec<Aggregation>,
    pub initial_values: Vec<f64>,
    pub warnings: Vec<String>,
    pub scenario: ScenarioFile,
}

/// Everything needed to simulate or evaluate a stored solution.
#[derive(Debug, Clone)]
pub struct LoadedSolution {
    pub meta: ArchiveMeta,
    pub model: Model,
    pub product: ProductSystem,
    pub solution: LexSolution,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn lambda_headers(sol: &LexSolution) -> Vec<String> {
    sol.max_objectives().iter().map(|k| format!("lambda_{k}")).collect()
}

fn key_fields(prod: &ProductSystem, sol: &LexSolution, h: usize, p: usize, combo: usize) -> Vec<String> {
    let ps = prod.state(p);
    let mut row = vec![h.to_string(), prod.base().state_name(ps.s).to_string(), ps.q.to_string()];
    for (m, &l) in sol.decode(combo).iter().enumerate() {
        row.push(sol.lambda_domains()[m].value(l).to_string());
    }
    row
}

/// Write `scenario`'s solution into `dir`, creating it if needed.
pub fn write_archive(dir: &Path, scenario: &ScenarioFile, prod: &ProductSystem, sol: &LexSolution) -> Result<()> {
    io(dir, std::fs::create_dir_all(dir))?;
    let k = sol.num_objectives();
    let meta = ArchiveMeta {
        format: FORMAT_VERSION,
        solver_version: env!("CARGO_PKG_VERSION").to_string(),
        config: ArchiveConfig {
            horizon: sol.horizon(),
            c_fail: sol.c_fail(),
            epsilon: match sol.epsilon() {
                Epsilon::Auto => None,
                Epsilon::Absolute(e) => Some(e),
            },
        },
        dimensions: ArchiveDimensions {
            horizon_layers: sol.horizon() + 1,
            product_states: prod.num_states(),
            automaton_states: prod.dfa().num_states(),
            lambda_sizes: sol.lambda_domains().iter().map(|d| d.len()).collect(),
            objectives: k,
            augmented_states: sol.num_augmented_states(),
        },
        aggregations: sol.aggregations().to_vec(),
        initial_values: sol.initial_values().to_vec(),
        warnings: sol.warnings.clone(),
        scenario: scenario.clone(),
    };
    let meta_path = dir.join("meta.json");
    io(&meta_path, std::fs::write(&meta_path, canonical_json(&meta)?))?;

    let lambdas = lambda_headers(sol);
    let mut header: Vec<String> = ["h", "s", "q"].iter().map(|s| s.to_string()).collect();
    header.extend(lambdas.iter().cloned());

    let policy_path = dir.join("policy.csv");
    let mut policy = csv::Writer::from_writer(BufWriter::new(io(&policy_path, File::create(&policy_path))?));
    let mut ph = header.clone();
    ph.push("action".into());
    ph.extend((0..k).map(|obj| format!("set_{obj}")));
    policy.write_record(&ph)?;
    let mut value_writers = Vec::with_capacity(k);
    for obj in 0..k {
        let path = dir.join(format!("values_{obj}.csv"));
        let mut w = csv::Writer::from_writer(BufWriter::new(io(&path, File::create(&path))?));
        let mut vh = header.clone();
        vh.push("value".into());
        w.write_record(&vh)?;
        value_writers.push(w);
    }

    let sys = prod.base();
    for h in 0..=sol.horizon() {
        for p in 0..prod.num_states() {
            for combo in 0..sol.num_combos() {
                let key = key_fields(prod, sol, h, p, combo);
                for (obj, w) in value_writers.iter_mut().enumerate() {
                    let mut row = key.clone();
                    row.push(sol.value(h, p, combo, obj).to_string());
                    w.write_record(&row)?;
                }
                if let Some(a) = sol.action(h, p, combo) {
                    let mut row = key;
                    row.push(sys.action_name(a).to_string());
                    for obj in 0..k {
                        let set: Vec<&str> = sol
                            .action_set(prod, h, p, combo, obj)
                            .into_iter()
                            .map(|a| sys.action_name(a))
                            .collect();
                        row.push(set.join("|"));
                    }
                    policy.write_record(&row)?;
                }
            }
        }
    }
    policy.flush().map_err(|e| Error::io(&policy_path, e))?;
    for w in &mut value_writers {
        w.flush().map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Table coordinates of one CSV row.
struct RowKey {
    h: usize,
    p: usize,
    combo: usize,
}

struct KeyReader<'a> {
    prod: &'a ProductSystem,
    lambda: &'a LambdaSpace,
    horizon: usize,
    file: String,
}

impl KeyReader<'_> {
    fn bad(&self, line: usize, msg: impl std::fmt::Display) -> Error {
        Error::schema(format!("/{line}"), format!("{}: {msg}", self.file))
    }

    fn key(&self, line: usize, rec: &csv::StringRecord) -> Result<RowKey> {
        let field = |i: usize| rec.get(i).ok_or_else(|| self.bad(line, format!("missing column {i}")));
        let h: usize = field(0)?.parse().map_err(|e| self.bad(line, e))?;
        if h > self.horizon {
            return Err(self.bad(line, format!("h = {h} exceeds the horizon")));
        }
        let s = self
            .prod
            .base()
            .state_by_name(field(1)?)
            .ok_or_else(|| self.bad(line, format!("unknown state `{}`", field(1).unwrap_or(""))))?;
        let q: usize = field(2)?.parse().map_err(|e| self.bad(line, e))?;
        let p = self
            .prod
            .index_of(ProductState { s, q })
            .ok_or_else(|| self.bad(line, "product state not reachable"))?;
        let mut lambdas = Vec::new();
        for (m, d) in self.lambda.domains.iter().enumerate() {
            let v: f64 = field(3 + m)?.parse().map_err(|e| self.bad(line, e))?;
            lambdas.push(d.index_of(v).ok_or_else(|| self.bad(line, format!("λ = {v} not in domain")))?);
        }
        Ok(RowKey {
            h,
            p,
            combo: self.lambda.encode(&lambdas),
        })
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::Reader::from_reader(BufReader::new(io(path, File::open(path))?)))
}

pub fn read_archive(dir: &Path) -> Result<LoadedSolution> {
    let meta_path = dir.join("meta.json");
    let text = io(&meta_path, std::fs::read_to_string(&meta_path))?;
    let meta: ArchiveMeta = from_json_text(&text).map_err(|e| e.with_path(&meta_path))?;
    if meta.format != FORMAT_VERSION {
        return Err(Error::schema("/format", format!("unsupported archive format {}", meta.format)).with_path(&meta_path));
    }
    let model = meta.scenario.compile().map_err(|e| e.with_path(&meta_path))?;
    let product = model.product()?;
    let epsilon = meta.config.epsilon.map_or(Epsilon::Auto, Epsilon::Absolute);
    let k = meta.aggregations.len();
    if model.costs.aggregations() != meta.aggregations {
        return Err(Error::schema("/aggregations", "objectives differ from the embedded scenario").with_path(&meta_path));
    }

    let lambda = LambdaSpace::new(&product, &model.costs);
    let horizon = meta.config.horizon;
    let n = (horizon + 1) * product.num_states() * lambda.combos;
    let (mut values, mut masks, mut policy) = (vec![f64::NAN; n * k], vec![0u64; n * k], vec![u32::MAX; n]);
    let index = |key: &RowKey| (key.h * product.num_states() + key.p) * lambda.combos + key.combo;
    let col = 3 + lambda.domains.len();

    for obj in 0..k {
        let path = dir.join(format!("values_{obj}.csv"));
        let reader = KeyReader {
            prod: &product,
            lambda: &lambda,
            horizon,
            file: path.display().to_string(),
        };
        for (i, rec) in csv_reader(&path)?.records().enumerate() {
            let rec = rec?;
            let key = reader.key(i + 2, &rec)?;
            let v: f64 = rec
                .get(col)
                .ok_or_else(|| reader.bad(i + 2, "missing value"))?
                .parse()
                .map_err(|e| reader.bad(i + 2, e))?;
            values[index(&key) * k + obj] = v;
        }
        if let Some(missing) = (0..n).find(|&i| values[i * k + obj].is_nan()) {
            return Err(reader.bad(0, format!("no value for augmented state {missing}")));
        }
    }

    let path = dir.join("policy.csv");
    let reader = KeyReader {
        prod: &product,
        lambda: &lambda,
        horizon,
        file: path.display().to_string(),
    };
    for (i, rec) in csv_reader(&path)?.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let key = reader.key(line, &rec)?;
        let choices = product.choices(key.p);
        let position = |name: &str| -> Result<(ActionId, usize)> {
            let a = product
                .base()
                .action_by_name(name)
                .ok_or_else(|| reader.bad(line, format!("unknown action `{name}`")))?;
            let ci = choices
                .iter()
                .position(|c| c.action == a)
                .ok_or_else(|| reader.bad(line, format!("action `{name}` not admissible")))?;
            Ok((a, ci))
        };
        let (a, _) = position(rec.get(col).ok_or_else(|| reader.bad(line, "missing action"))?)?;
        let at = index(&key);
        policy[at] = a.0 as u32;
        for obj in 0..k {
            let set = rec.get(col + 1 + obj).ok_or_else(|| reader.bad(line, "missing action set"))?;
            let mut mask = 0u64;
            for name in set.split('|').filter(|s| !s.is_empty()) {
                mask |= 1u64 << position(name)?.1;
            }
            masks[at * k + obj] = mask;
        }
    }

    let mut solution = LexSolution::from_parts(
        horizon,
        meta.config.c_fail,
        epsilon,
        meta.aggregations.clone(),
        lambda,
        product.num_states(),
        (values, masks, policy),
    )?;
    solution.warnings = meta.warnings.clone();
    Ok(LoadedSolution {
        meta,
        model,
        product,
        solution,
    })
}
