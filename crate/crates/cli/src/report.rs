//! Report types. Reports are deterministic for a fixed manifest and seed:
//! struct fields serialize in declaration order, all maps are ordered, and
//! every float is emitted with 17 significant digits.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use tetrad_core::expr::Point;

/// An `f64` serialized as a JSON number with 17 significant digits.
#[derive(Clone, Copy, Debug)]
pub struct F(pub f64);

impl Serialize for F {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let text = format!("{:.16e}", self.0);
            let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

pub fn fs(values: &[f64]) -> Vec<F> {
    values.iter().map(|&v| F(v)).collect()
}

pub fn point(p: &Point) -> Vec<F> {
    fs(&p.coords)
}

#[derive(Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: Tool,
    pub manifest_hash: String,
    pub grid_points: usize,
    pub seed: u64,
    pub warnings: Vec<Warning>,
    pub tasks: Vec<TaskOutcome>,
}

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Serialize, Clone, PartialEq)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
pub struct TaskOutcome {
    pub cmd: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<TaskData>,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum TaskData {
    ClassifyDist(ClassifyDist),
    VerifySymmetry(VerifySymmetry),
    CanonicalLine(CanonicalLine),
    Tanaka(Tanaka),
    Realize(Realize),
    Utxi(Utxi),
    ProcomplexCheck(ProcomplexCheck),
    CocomplexCheck(CocomplexCheck),
    ClassifyMa(ClassifyMa),
    MaCheck(MaCheck),
    MaFrame(MaFrame),
    StructureFunctions(StructureFunctions),
    VerifyTables(VerifyTables),
    Slope(Slope),
}

#[derive(Serialize)]
pub struct ClassifyDist {
    pub dist: String,
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<GrowthWitness>,
}

#[derive(Serialize)]
pub struct GrowthWitness {
    pub point: Vec<F>,
    pub growth: Vec<usize>,
}

#[derive(Serialize)]
pub struct VerifySymmetry {
    pub dist: String,
    pub field: String,
    pub is_symmetry: bool,
    pub characteristic: bool,
    pub max_residual: F,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Vec<F>>,
}

#[derive(Serialize)]
pub struct CanonicalLine {
    pub dist: String,
    pub per_point: Vec<LineAtPoint>,
}

#[derive(Serialize)]
pub struct LineAtPoint {
    pub point: Vec<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_coefficients: Option<Vec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct Tanaka {
    pub dist: String,
    pub basis_convention: &'static str,
    pub per_point: Vec<TanakaAtPoint>,
}

#[derive(Serialize)]
pub struct TanakaAtPoint {
    pub point: Vec<F>,
    pub graded_dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_form: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub one_form: Option<Vec<F>>,
    pub basis: Vec<Vec<F>>,
}

#[derive(Serialize)]
pub struct Realize {
    pub dist: String,
    pub registered_as: String,
    pub j_squared_structural: bool,
    pub matched_points: usize,
    pub vanishing_points: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mismatched: Vec<Vec<F>>,
}

#[derive(Serialize)]
pub struct Utxi {
    pub acs: String,
    pub labels_swapped: bool,
    pub per_point: Vec<UtxiAtPoint>,
}

#[derive(Serialize)]
pub struct UtxiAtPoint {
    pub point: Vec<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<F>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u1: Option<Vec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2: Option<Vec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_metric_scale: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_metric_scale: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_orientation: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_orientation: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega1: Option<Vec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega2: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<UtxiResiduals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct UtxiResiduals {
    pub n_x1_x3: F,
    pub n_x2_x3: F,
    pub n_x1_x4: F,
    pub n_x2_x4_plus: F,
    pub n_x2_x4_minus: F,
}

#[derive(Serialize)]
pub struct ProcomplexCheck {
    pub acs: String,
    pub t_axis: usize,
    pub spectrum_residual: F,
    pub rank_ok: bool,
    pub anticommutation_residual: F,
}

#[derive(Serialize)]
pub struct CocomplexCheck {
    pub dist: String,
    pub kernel_field: String,
    pub seed: String,
    pub lw_alpha_residual: F,
    pub anticommutation_residual: F,
    pub image_matched_points: usize,
    pub obstruction_vanishing_points: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub image_mismatched: Vec<Vec<F>>,
}

#[derive(Serialize)]
pub struct ClassifyMa {
    pub pair: [String; 2],
    #[serde(rename = "type")]
    pub ty: String,
    pub pf_min: F,
    pub pf_max: F,
    pub effective_residual: F,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pf_expr: Option<String>,
    /// Verdict under the opposite normalization convention (Pf scaled to
    /// -1), reported alongside the primary one.
    pub negative_convention_type: String,
}

#[derive(Serialize)]
pub struct MaCheck {
    pub pair: [String; 2],
    pub all_nondegenerate: bool,
    pub max_n_norm: F,
    pub per_point: Vec<MaCheckAtPoint>,
}

#[derive(Serialize)]
pub struct MaCheckAtPoint {
    pub point: Vec<F>,
    pub n_norm: F,
    pub n_nonzero: bool,
    pub dalpha_on_plane: F,
    pub dalpha_nonzero: bool,
    pub overall: bool,
    pub alpha_on_plane: F,
    pub dual_field_in_image: F,
    pub lagrangian_plane_ok: bool,
    pub lemma2_consistent: bool,
}

#[derive(Serialize)]
pub struct MaFrame {
    pub pair: [String; 2],
    pub registered_as: String,
    pub bracket_mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<FrameFields>,
    pub per_point: Vec<FrameAtPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<DegenerateStep>,
}

#[derive(Serialize)]
pub struct FrameFields {
    pub p1: String,
    pub p2: String,
    pub q1: String,
    pub q2: String,
}

#[derive(Serialize)]
pub struct DegenerateStep {
    pub step: String,
    pub point: Vec<F>,
}

#[derive(Serialize)]
pub struct FrameAtPoint {
    pub point: Vec<F>,
    pub p1: Vec<F>,
    pub p2: Vec<F>,
    pub q1: Vec<F>,
    pub q2: Vec<F>,
    pub w: [F; 2],
    pub slope: F,
    pub lemma3_residuals: Vec<F>,
}

#[derive(Serialize)]
pub struct StructureFunctions {
    pub frame: String,
    /// pair order: (P1,P2), (P1,Q1), (P1,Q2), (P2,Q1), (P2,Q2), (Q1,Q2)
    pub pair_order: [&'static str; 6],
    pub per_point: Vec<StructureFunctionsAtPoint>,
}

#[derive(Serialize)]
pub struct StructureFunctionsAtPoint {
    pub point: Vec<F>,
    pub coefficients: Vec<Vec<F>>,
    pub reconstruction_residual: F,
}

#[derive(Serialize)]
pub struct VerifyTables {
    pub frame: String,
    pub all_pass: bool,
    pub per_point: Vec<TablesAtPoint>,
}

#[derive(Serialize)]
pub struct TablesAtPoint {
    pub point: Vec<F>,
    pub omega_residual: F,
    pub nijenhuis_residual: F,
    pub j_residual: F,
    pub alpha_residual: F,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct Slope {
    pub frame: String,
    pub per_point: Vec<SlopeAtPoint>,
    /// Pairs of adjacent lattice points whose slopes jump; reported, never
    /// repaired.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub continuity_breaks: Vec<[Vec<F>; 2]>,
}

#[derive(Serialize)]
pub struct SlopeAtPoint {
    pub point: Vec<F>,
    pub w: [F; 2],
    pub slope: F,
}
