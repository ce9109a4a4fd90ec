//! Numeric thresholds used across the pipeline. All overridable; the
//! defaults are the ones the verification suites are calibrated to.

/// Named tolerance set threaded through rank decisions and verdicts.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Relative singular-value cutoff for pointwise rank decisions.
    pub rank_rel: f64,
    /// A pointwise matrix counts as degenerate below this relative pivot.
    pub degenerate_rel: f64,
    /// Symmetry verification: largest allowed bracket component orthogonal
    /// to the distribution.
    pub symmetry: f64,
    /// Frame-relation residuals (Nijenhuis eigenframe equations).
    pub frame: f64,
    /// Nondegeneracy cutoffs for Monge-Ampere verdicts.
    pub nondegen: f64,
    /// Canonical-frame table residual bound.
    pub table: f64,
    /// Lepage division residual bound.
    pub lepage: f64,
    /// Residual bound for the duality identity tying the curvature-like
    /// 2-form to the Lepage field.
    pub jr_identity: f64,
    /// Allowed deviation of `j^2 + 1` at sample points.
    pub j_squared: f64,
    /// Sign cutoff when classifying by the Pfaffian.
    pub pf_sign: f64,
    /// Structural-zero checks evaluated numerically.
    pub exact_zero: f64,
    /// Step for the optional finite-difference bracket fallback.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rel: 1e-8,
            degenerate_rel: 1e-8,
            symmetry: 1e-9,
            frame: 1e-8,
            nondegen: 1e-8,
            table: 1e-7,
            lepage: 1e-10,
            jr_identity: 1e-9,
            j_squared: 1e-9,
            pf_sign: 1e-10,
            exact_zero: 1e-12,
            fd_step: 1e-5,
        }
    }
}

impl Tolerances {
    /// Set a tolerance by its field name; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match key {
            "rank_rel" => self.rank_rel = value,
            "degenerate_rel" => self.degenerate_rel = value,
            "symmetry" => self.symmetry = value,
            "frame" => self.frame = value,
            "nondegen" => self.nondegen = value,
            "table" => self.table = value,
            "lepage" => self.lepage = value,
            "jr_identity" => self.jr_identity = value,
            "j_squared" => self.j_squared = value,
            "pf_sign" => self.pf_sign = value,
            "exact_zero" => self.exact_zero = value,
            "fd_step" => self.fd_step = value,
            _ => return false,
        }
        true
    }
}
