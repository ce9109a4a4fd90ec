//! Manifest schema: a chart, named objects given as expression strings,
//! a grid specification and a task list. Unknown fields are rejected and
//! every expression is parsed (with byte offsets in errors) before any task
//! runs.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use tetrad_core::distribution::Distribution;
use tetrad_core::exterior::{increasing_subsets, DiffForm, EndoField, VectorField};
use tetrad_core::expr::{parse, Expr};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: u32,
    pub chart: Chart,
    pub objects: BTreeMap<String, ObjectSpec>,
    pub grid: GridSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chart {
    pub dim: usize,
    pub vars: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind")]
#[serde(deny_unknown_fields)]
pub enum ObjectSpec {
    #[serde(rename = "form1")]
    Form1 { components: BTreeMap<String, String> },
    #[serde(rename = "form2")]
    Form2 { components: BTreeMap<String, String> },
    #[serde(rename = "form3")]
    Form3 { components: BTreeMap<String, String> },
    #[serde(rename = "vector")]
    Vector { components: Vec<String> },
    #[serde(rename = "endo")]
    Endo { rows: Vec<Vec<String>> },
    #[serde(rename = "distribution")]
    Distribution { spans: Vec<Vec<String>> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "cmd")]
#[serde(deny_unknown_fields)]
pub enum Task {
    #[serde(rename = "classify-dist")]
    ClassifyDist { dist: String },
    #[serde(rename = "verify-symmetry")]
    VerifySymmetry { dist: String, field: String },
    #[serde(rename = "canonical-line")]
    CanonicalLine { dist: String },
    #[serde(rename = "tanaka")]
    Tanaka { dist: String },
    #[serde(rename = "realize")]
    Realize {
        dist: String,
        sym1: String,
        sym2: String,
        #[serde(rename = "as")]
        name: String,
    },
    #[serde(rename = "utxi")]
    Utxi { acs: String },
    #[serde(rename = "procomplex-check")]
    ProcomplexCheck {
        acs: String,
        /// 1-based coordinate index of the parameter axis.
        t_axis: usize,
    },
    #[serde(rename = "cocomplex-check")]
    CocomplexCheck {
        dist: String,
        w: String,
        seed: String,
    },
    #[serde(rename = "classify-ma")]
    ClassifyMa { pair: [String; 2] },
    #[serde(rename = "ma-check")]
    MaCheck { pair: [String; 2] },
    #[serde(rename = "ma-frame")]
    MaFrame {
        pair: [String; 2],
        #[serde(rename = "as")]
        name: String,
    },
    #[serde(rename = "structure-functions")]
    StructureFunctions { frame: String },
    #[serde(rename = "verify-theorem5")]
    VerifyTheorem5 { frame: String },
    #[serde(rename = "slope")]
    Slope { frame: String },
}

impl Task {
    pub fn cmd(&self) -> &'static str {
        match self {
            Task::ClassifyDist { .. } => "classify-dist",
            Task::VerifySymmetry { .. } => "verify-symmetry",
            Task::CanonicalLine { .. } => "canonical-line",
            Task::Tanaka { .. } => "tanaka",
            Task::Realize { .. } => "realize",
            Task::Utxi { .. } => "utxi",
            Task::ProcomplexCheck { .. } => "procomplex-check",
            Task::CocomplexCheck { .. } => "cocomplex-check",
            Task::ClassifyMa { .. } => "classify-ma",
            Task::MaCheck { .. } => "ma-check",
            Task::MaFrame { .. } => "ma-frame",
            Task::StructureFunctions { .. } => "structure-functions",
            Task::VerifyTheorem5 { .. } => "verify-theorem5",
            Task::Slope { .. } => "slope",
        }
    }
}

/// A parsed manifest object.
#[derive(Debug, Clone)]
pub enum Object {
    Form(DiffForm),
    Vector(VectorField),
    Endo(EndoField),
    Dist(Distribution),
}

impl Object {
    pub fn kind(&self) -> &'static str {
        match self {
            Object::Form(f) => match f.degree {
                1 => "form1",
                2 => "form2",
                _ => "form3",
            },
            Object::Vector(_) => "vector",
            Object::Endo(_) => "endo",
            Object::Dist(_) => "distribution",
        }
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            bail!("unsupported schema version {} (expected 1)", self.schema);
        }
        let n = self.chart.dim;
        if n != 3 && n != 4 {
            bail!("chart.dim must be 3 or 4, got {}", n);
        }
        if self.chart.vars.len() != n {
            bail!("chart.vars must list {} names", n);
        }
        for (i, v) in self.chart.vars.iter().enumerate() {
            let expect = format!("x{}", i + 1);
            if v != &expect {
                bail!("chart.vars[{}] must be `{}`, got `{}`", i, expect, v);
            }
        }
        let lat = &self.grid.lattice;
        if lat.min.len() != n || lat.max.len() != n || lat.counts.len() != n {
            bail!("grid.lattice arrays must have length {}", n);
        }
        if lat.counts.iter().any(|&c| c == 0) {
            bail!("grid.lattice.counts entries must be positive");
        }
        for i in 0..n {
            if !(lat.min[i] <= lat.max[i]) {
                bail!("grid.lattice.min[{}] must not exceed max[{}]", i, i);
            }
        }
        if self.grid.random == 0 && lat.counts.iter().product::<usize>() == 0 {
            bail!("grid is empty");
        }
        Ok(())
    }

    /// Parse every object's expressions against the chart.
    pub fn build_objects(&self) -> Result<BTreeMap<String, Object>> {
        let n = self.chart.dim;
        let parse_named = |name: &str, loc: &str, text: &str| -> Result<Expr> {
            parse(text, n).map_err(|e| anyhow!("object `{}` {}: {}", name, loc, e))
        };
        let mut out = BTreeMap::new();
        for (name, spec) in &self.objects {
            let obj = match spec {
                ObjectSpec::Form1 { components } => {
                    Object::Form(parse_form(name, components, n, 1, &parse_named)?)
                }
                ObjectSpec::Form2 { components } => {
                    Object::Form(parse_form(name, components, n, 2, &parse_named)?)
                }
                ObjectSpec::Form3 { components } => {
                    Object::Form(parse_form(name, components, n, 3, &parse_named)?)
                }
                ObjectSpec::Vector { components } => {
                    if components.len() != n {
                        bail!("object `{}`: vector needs {} components", name, n);
                    }
                    let comps = components
                        .iter()
                        .enumerate()
                        .map(|(i, t)| parse_named(name, &format!("component {}", i + 1), t))
                        .collect::<Result<Vec<_>>>()?;
                    Object::Vector(VectorField::new(n, comps))
                }
                ObjectSpec::Endo { rows } => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        bail!("object `{}`: endo needs a {}x{} matrix", name, n, n);
                    }
                    let mat = rows
                        .iter()
                        .enumerate()
                        .map(|(i, row)| {
                            row.iter()
                                .enumerate()
                                .map(|(j, t)| {
                                    parse_named(name, &format!("entry ({},{})", i + 1, j + 1), t)
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Object::Endo(EndoField::from_rows(mat))
                }
                ObjectSpec::Distribution { spans } => {
                    if spans.is_empty() {
                        bail!("object `{}`: distribution needs spanning fields", name);
                    }
                    let fields = spans
                        .iter()
                        .enumerate()
                        .map(|(k, comps)| {
                            if comps.len() != n {
                                bail!("object `{}`: span {} needs {} components", name, k + 1, n);
                            }
                            let parsed = comps
                                .iter()
                                .enumerate()
                                .map(|(i, t)| {
                                    parse_named(
                                        name,
                                        &format!("span {} component {}", k + 1, i + 1),
                                        t,
                                    )
                                })
                                .collect::<Result<Vec<_>>>()?;
                            Ok(VectorField::new(n, parsed))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Object::Dist(Distribution::new(fields))
                }
            };
            out.insert(name.clone(), obj);
        }
        Ok(out)
    }
}

fn parse_form(
    name: &str,
    components: &BTreeMap<String, String>,
    n: usize,
    degree: usize,
    parse_named: &impl Fn(&str, &str, &str) -> Result<Expr>,
) -> Result<DiffForm> {
    let subsets = increasing_subsets(n, degree);
    let mut form = DiffForm::zero(n, degree);
    for (key, text) in components {
        let mut indices = Vec::new();
        for ch in key.chars() {
            let d = ch
                .to_digit(10)
                .with_context(|| format!("object `{}`: bad component key `{}`", name, key))?
                as usize;
            if d < 1 || d > n {
                bail!("object `{}`: component key `{}` out of range", name, key);
            }
            indices.push(d - 1);
        }
        if indices.len() != degree {
            bail!(
                "object `{}`: component key `{}` must have {} indices",
                name,
                key,
                degree
            );
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            bail!(
                "object `{}`: component key `{}` must be strictly increasing",
                name,
                key
            );
        }
        if !subsets.iter().any(|s| s == &indices) {
            bail!("object `{}`: component key `{}` invalid", name, key);
        }
        let e = parse_named(name, &format!("component {}", key), text)?;
        form = form.with_term(&indices, e);
    }
    Ok(form)
}
