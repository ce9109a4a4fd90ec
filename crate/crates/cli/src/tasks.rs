//! Task execution over an object registry. Tasks run in manifest order;
//! verdict failures are data, only structural failures (missing objects,
//! degenerate inputs, evaluation errors) mark a task as errored.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use tetrad_core::almost_complex::{
    cocomplex_realize, nijenhuis, procomplex_from_acs, realize_distribution, utxi_invariant,
    AlmostComplexStructure,
};
use tetrad_core::distribution::{
    canonical_line, classify_2dist_r4, derived_flag, tanaka_data, verify_symmetry, Distribution,
};
use tetrad_core::expr::Point;
use tetrad_core::exterior::{render_field, VectorValued2Form};
use tetrad_core::monge_ampere::{
    canonical_frame, classify_pair, nondegenerate, normalize_elliptic, r_tensor,
    structure_functions, verify_frame_tables, BracketMode, FrameResult, MaType, MongeAmperePair,
};
use tetrad_core::Tolerances;

use crate::manifest::{Object, Task};
use crate::report::{self, TaskData, Warning, F};

/// Runtime registry: manifest objects plus task-created structures.
pub struct Registry {
    pub objects: BTreeMap<String, Object>,
    pub structures: BTreeMap<String, (AlmostComplexStructure, VectorValued2Form)>,
    pub frames: BTreeMap<String, (Box<MongeAmperePair>, FrameResult)>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub swap_ut_labels: bool,
    pub numeric_bracket: bool,
}

/// Cap on rendered expression length in reports.
const RENDER_CAP: usize = 65536;

fn render_capped(field: &tetrad_core::exterior::VectorField) -> String {
    if field.comps.iter().map(|c| c.dag_size()).sum::<usize>() > 4096 {
        return format!("<expression omitted: {} nodes>", field.comps.iter().map(|c| c.dag_size()).sum::<usize>());
    }
    let s = render_field(field);
    if s.len() > RENDER_CAP {
        format!("<expression omitted: {} bytes>", s.len())
    } else {
        s
    }
}

impl Registry {
    fn dist(&self, name: &str) -> Result<&Distribution> {
        match self.objects.get(name) {
            Some(Object::Dist(d)) => Ok(d),
            Some(o) => bail!("object `{}` is a {}, expected a distribution", name, o.kind()),
            None => bail!("unknown object `{}`", name),
        }
    }

    fn vector(&self, name: &str) -> Result<&tetrad_core::exterior::VectorField> {
        match self.objects.get(name) {
            Some(Object::Vector(v)) => Ok(v),
            Some(o) => bail!("object `{}` is a {}, expected a vector field", name, o.kind()),
            None => bail!("unknown object `{}`", name),
        }
    }

    fn endo(&self, name: &str) -> Result<&tetrad_core::exterior::EndoField> {
        match self.objects.get(name) {
            Some(Object::Endo(e)) => Ok(e),
            Some(o) => bail!("object `{}` is a {}, expected an endomorphism", name, o.kind()),
            None => bail!("unknown object `{}`", name),
        }
    }

    fn form2(&self, name: &str) -> Result<&tetrad_core::exterior::DiffForm> {
        match self.objects.get(name) {
            Some(Object::Form(f)) if f.degree == 2 => Ok(f),
            Some(o) => bail!("object `{}` is a {}, expected a 2-form", name, o.kind()),
            None => bail!("unknown object `{}`", name),
        }
    }

    fn structure(&self, name: &str) -> Result<&(AlmostComplexStructure, VectorValued2Form)> {
        self.structures
            .get(name)
            .ok_or_else(|| anyhow!("unknown structure `{}` (produced by a realize task)", name))
    }

    fn frame(&self, name: &str) -> Result<&(Box<MongeAmperePair>, FrameResult)> {
        self.frames
            .get(name)
            .ok_or_else(|| anyhow!("unknown frame `{}` (produced by a ma-frame task)", name))
    }
}

pub fn run_task(
    task: &Task,
    reg: &mut Registry,
    grid: &[Point],
    tol: &Tolerances,
    opts: &RunOptions,
    warnings: &mut Vec<Warning>,
) -> Result<TaskData> {
    match task {
        Task::ClassifyDist { dist } => {
            let d = reg.dist(dist)?;
            let (class, flag) = classify_2dist_r4(d, grid, tol)?;
            let witnesses = match &class {
                tetrad_core::distribution::RegularityClass::NonRegular(w) => w
                    .iter()
                    .map(|(p, g)| report::GrowthWitness {
                        point: report::point(p),
                        growth: g.clone(),
                    })
                    .collect(),
                _ => Vec::new(),
            };
            Ok(TaskData::ClassifyDist(report::ClassifyDist {
                dist: dist.clone(),
                class: class.name().to_string(),
                growth: flag.uniform_growth().cloned(),
                witnesses,
            }))
        }
        Task::VerifySymmetry { dist, field } => {
            let d = reg.dist(dist)?;
            let v = reg.vector(field)?;
            let rep = verify_symmetry(v, d, grid, tol)?;
            Ok(TaskData::VerifySymmetry(report::VerifySymmetry {
                dist: dist.clone(),
                field: field.clone(),
                is_symmetry: rep.is_symmetry,
                characteristic: rep.characteristic,
                max_residual: F(rep.max_residual),
                witnesses: rep.witnesses.iter().map(report::point).collect(),
            }))
        }
        Task::CanonicalLine { dist } => {
            let d = reg.dist(dist)?;
            let flag = derived_flag(d, grid, 4, tol)?;
            let per_point = grid
                .iter()
                .map(|p| match canonical_line(d, &flag, p, tol) {
                    Ok((dir, coeffs)) => report::LineAtPoint {
                        point: report::point(p),
                        direction: Some(report::fs(&dir)),
                        span_coefficients: Some(report::fs(&coeffs)),
                        error: None,
                    },
                    Err(e) => report::LineAtPoint {
                        point: report::point(p),
                        direction: None,
                        span_coefficients: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect();
            Ok(TaskData::CanonicalLine(report::CanonicalLine {
                dist: dist.clone(),
                per_point,
            }))
        }
        Task::Tanaka { dist } => {
            let d = reg.dist(dist)?;
            let per_point = grid
                .iter()
                .map(|p| {
                    let t = tanaka_data(d, p, tol)?;
                    Ok(report::TanakaAtPoint {
                        point: report::point(p),
                        graded_dims: t.graded_dims,
                        two_form: t.two_form.map(F),
                        one_form: t.one_form.map(|a| report::fs(&a)),
                        basis: t.basis.iter().map(|b| report::fs(b)).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TaskData::Tanaka(report::Tanaka {
                dist: dist.clone(),
                basis_convention:
                    "greedy pivoted Gram-Schmidt over spans then brackets in level order",
                per_point,
            }))
        }
        Task::Realize {
            dist,
            sym1,
            sym2,
            name,
        } => {
            let d = reg.dist(dist)?;
            let s1 = reg.vector(sym1)?;
            let s2 = reg.vector(sym2)?;
            let rep = realize_distribution(d, s1, s2, grid, tol)?;
            let data = report::Realize {
                dist: dist.clone(),
                registered_as: name.clone(),
                j_squared_structural: rep.j_squared_structural,
                matched_points: rep.matched,
                vanishing_points: rep.vanishing.len(),
                mismatched: rep.mismatched.iter().map(report::point).collect(),
            };
            reg.structures
                .insert(name.clone(), (rep.acs, rep.nij));
            Ok(TaskData::Realize(data))
        }
        Task::Utxi { acs } => {
            // accept either a realized structure or a plain endo object
            if !reg.structures.contains_key(acs) {
                if let Ok(e) = reg.endo(acs) {
                    let e = e.clone();
                    let s = AlmostComplexStructure::new(e, grid, tol)?;
                    let nij = nijenhuis(&s)?;
                    reg.structures.insert(acs.clone(), (s, nij));
                }
            }
            let (structure, nij) = reg.structure(acs)?;
            // surface the measured sign of the fourth frame relation once
            let warning = Warning {
                code: "utxi-fourth-relation-sign".to_string(),
                message: "the antilinearity identity N(jX,Y) = -j N(X,Y) forces \
                          N(x2, x4) = +x1 whenever N(x1, x4) = x2; both signed \
                          residuals are reported"
                    .to_string(),
            };
            if !warnings.contains(&warning) {
                warnings.push(warning);
            }
            let per_point = grid
                .iter()
                .map(|p| {
                    match utxi_invariant(structure, nij, p, opts.swap_ut_labels, tol) {
                        Ok(inv) => report::UtxiAtPoint {
                            point: report::point(p),
                            frame: Some(inv.frame.iter().map(|f| report::fs(f)).collect()),
                            u1: Some(report::fs(&inv.u1)),
                            u2: Some(report::fs(&inv.u2)),
                            t_metric_scale: Some(F(inv.t_metric_scale)),
                            xi_metric_scale: Some(F(inv.xi_metric_scale)),
                            t_orientation: Some(inv.t_orientation),
                            xi_orientation: Some(inv.xi_orientation),
                            omega1: Some(report::fs(&inv.omega1)),
                            omega2: Some(F(inv.omega2)),
                            residuals: Some(report::UtxiResiduals {
                                n_x1_x3: F(inv.residuals.n13),
                                n_x2_x3: F(inv.residuals.n23),
                                n_x1_x4: F(inv.residuals.n14),
                                n_x2_x4_plus: F(inv.residuals.n24_plus),
                                n_x2_x4_minus: F(inv.residuals.n24_minus),
                            }),
                            error: None,
                        },
                        Err(e) => report::UtxiAtPoint {
                            point: report::point(p),
                            frame: None,
                            u1: None,
                            u2: None,
                            t_metric_scale: None,
                            xi_metric_scale: None,
                            t_orientation: None,
                            xi_orientation: None,
                            omega1: None,
                            omega2: None,
                            residuals: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            Ok(TaskData::Utxi(report::Utxi {
                acs: acs.clone(),
                labels_swapped: opts.swap_ut_labels,
                per_point,
            }))
        }
        Task::ProcomplexCheck { acs, t_axis } => {
            let n = grid.first().map(|p| p.dim()).unwrap_or(4);
            if *t_axis < 1 || *t_axis > n {
                bail!("t_axis must be between 1 and {}", n);
            }
            // accept either a realized structure or a plain endo object
            let structure = if let Ok((s, _)) = reg.structure(acs) {
                s.clone()
            } else {
                let e = reg.endo(acs)?;
                AlmostComplexStructure::new(e.clone(), grid, tol)?
            };
            let (pro, rep) = procomplex_from_acs(&structure, t_axis - 1, grid, tol)?;
            let anticommutation = pro.anticommutation_residual(grid)?;
            Ok(TaskData::ProcomplexCheck(report::ProcomplexCheck {
                acs: acs.clone(),
                t_axis: *t_axis,
                spectrum_residual: F(rep.spectrum_residual),
                rank_ok: rep.rank_ok,
                anticommutation_residual: F(anticommutation),
            }))
        }
        Task::CocomplexCheck { dist, w, seed } => {
            let d = reg.dist(dist)?;
            let wf = reg.vector(w)?;
            let seed_e = reg.endo(seed)?;
            let rep = cocomplex_realize(d, wf, seed_e, grid, tol)?;
            Ok(TaskData::CocomplexCheck(report::CocomplexCheck {
                dist: dist.clone(),
                kernel_field: w.clone(),
                seed: seed.clone(),
                lw_alpha_residual: F(rep.lw_alpha_residual),
                anticommutation_residual: F(rep.anticommutation_residual),
                image_matched_points: rep.image_matched,
                obstruction_vanishing_points: rep.a_vanishing.len(),
                image_mismatched: rep.image_mismatched.iter().map(report::point).collect(),
            }))
        }
        Task::ClassifyMa { pair } => {
            let omega = reg.form2(&pair[0])?;
            let theta = reg.form2(&pair[1])?;
            let (ty, detail) = classify_pair(omega, theta, grid, tol)?;
            let warning = Warning {
                code: "pf-sign-convention".to_string(),
                message: "elliptic means Pf > 0 with the normalization Pf = +1; \
                          the verdict under the opposite convention (rescaling \
                          toward Pf = -1) is reported alongside"
                    .to_string(),
            };
            if !warnings.contains(&warning) {
                warnings.push(warning);
            }
            // under the opposite convention the roles of the signs swap
            let negative_convention = match &ty {
                MaType::Elliptic => "Hyperbolic",
                MaType::Hyperbolic => "Elliptic",
                other => other.name(),
            };
            let pf_rendered = format!("{}", detail.pf);
            Ok(TaskData::ClassifyMa(report::ClassifyMa {
                pair: pair.clone(),
                ty: ty.name().to_string(),
                pf_min: F(detail.pf_min),
                pf_max: F(detail.pf_max),
                effective_residual: F(detail.effective_residual),
                pf_expr: if pf_rendered.len() <= 4096 {
                    Some(pf_rendered)
                } else {
                    None
                },
                negative_convention_type: negative_convention.to_string(),
            }))
        }
        Task::MaCheck { pair } => {
            let omega = reg.form2(&pair[0])?;
            let theta = reg.form2(&pair[1])?;
            let ma = normalize_elliptic(omega, theta, grid, tol)?;
            let r = r_tensor(&ma)?;
            let mut per_point = Vec::new();
            let mut all = true;
            let mut max_n = 0.0f64;
            for p in grid {
                let v = nondegenerate(&ma, &r, p, tol)?;
                all = all && v.overall;
                max_n = max_n.max(v.n_norm);
                per_point.push(report::MaCheckAtPoint {
                    point: report::point(p),
                    n_norm: F(v.n_norm),
                    n_nonzero: v.n_nonzero,
                    dalpha_on_plane: F(v.dalpha_value),
                    dalpha_nonzero: v.dalpha_nonzero,
                    overall: v.overall,
                    alpha_on_plane: F(v.alpha_on_plane),
                    dual_field_in_image: F(if v.xalpha_in_image.is_finite() {
                        v.xalpha_in_image
                    } else {
                        -1.0
                    }),
                    lagrangian_plane_ok: v.lagrangian_plane_ok,
                    lemma2_consistent: v.lemma2_consistent,
                });
            }
            Ok(TaskData::MaCheck(report::MaCheck {
                pair: pair.clone(),
                all_nondegenerate: all,
                max_n_norm: F(max_n),
                per_point,
            }))
        }
        Task::MaFrame { pair, name } => {
            let omega = reg.form2(&pair[0])?;
            let theta = reg.form2(&pair[1])?;
            let ma = normalize_elliptic(omega, theta, grid, tol)?;
            let mode = if opts.numeric_bracket {
                BracketMode::NumericFd
            } else {
                BracketMode::Symbolic
            };
            let frame = canonical_frame(&ma, grid, tol, mode)?;
            let fields = frame.fields.as_ref().map(|f| report::FrameFields {
                p1: render_capped(&f.p1),
                p2: render_capped(&f.p2),
                q1: render_capped(&f.q1),
                q2: render_capped(&f.q2),
            });
            let per_point = frame
                .points
                .iter()
                .map(|d| report::FrameAtPoint {
                    point: report::point(&d.point),
                    p1: report::fs(&d.frame[0]),
                    p2: report::fs(&d.frame[1]),
                    q1: report::fs(&d.frame[2]),
                    q2: report::fs(&d.frame[3]),
                    w: [F(d.w.0), F(d.w.1)],
                    slope: F(d.slope),
                    lemma3_residuals: report::fs(&d.lemma3),
                })
                .collect();
            let degenerate = frame
                .degenerate
                .iter()
                .map(|(step, p)| report::DegenerateStep {
                    step: step.clone(),
                    point: report::point(p),
                })
                .collect();
            let data = report::MaFrame {
                pair: pair.clone(),
                registered_as: name.clone(),
                bracket_mode: if opts.numeric_bracket {
                    "numeric-fd"
                } else {
                    "symbolic"
                },
                fields,
                per_point,
                degenerate,
            };
            reg.frames.insert(name.clone(), (Box::new(ma), frame));
            Ok(TaskData::MaFrame(data))
        }
        Task::StructureFunctions { frame } => {
            let (pair, fr) = reg.frame(frame)?;
            let mode = if opts.numeric_bracket {
                BracketMode::NumericFd
            } else {
                BracketMode::Symbolic
            };
            let sf = structure_functions(pair, fr, tol, mode)?;
            Ok(TaskData::StructureFunctions(report::StructureFunctions {
                frame: frame.clone(),
                pair_order: ["P1,P2", "P1,Q1", "P1,Q2", "P2,Q1", "P2,Q2", "Q1,Q2"],
                per_point: sf
                    .iter()
                    .map(|s| report::StructureFunctionsAtPoint {
                        point: report::point(&s.point),
                        coefficients: s.coeffs.iter().map(|c| report::fs(c)).collect(),
                        reconstruction_residual: F(s.residual),
                    })
                    .collect(),
            }))
        }
        Task::VerifyTheorem5 { frame } => {
            let (pair, fr) = reg.frame(frame)?;
            let reports = verify_frame_tables(pair, fr, tol)?;
            let all_pass = reports.iter().all(|r| r.pass);
            Ok(TaskData::VerifyTables(report::VerifyTables {
                frame: frame.clone(),
                all_pass,
                per_point: reports
                    .iter()
                    .map(|r| report::TablesAtPoint {
                        point: report::point(&r.point),
                        omega_residual: F(r.omega_residual),
                        nijenhuis_residual: F(r.nijenhuis_residual),
                        j_residual: F(r.j_residual),
                        alpha_residual: F(r.alpha_residual),
                        pass: r.pass,
                    })
                    .collect(),
            }))
        }
        Task::Slope { frame } => {
            let (_, fr) = reg.frame(frame)?;
            let per_point: Vec<report::SlopeAtPoint> = fr
                .points
                .iter()
                .map(|d| report::SlopeAtPoint {
                    point: report::point(&d.point),
                    w: [F(d.w.0), F(d.w.1)],
                    slope: F(d.slope),
                })
                .collect();
            // a posteriori continuity scan: flag adjacent points (in grid
            // order) whose slope jumps by more than 0.5 rad after folding
            let mut breaks = Vec::new();
            for w in fr.points.windows(2) {
                let d = (w[0].slope - w[1].slope).abs();
                let folded = d.min((core::f64::consts::FRAC_PI_2 - d).abs());
                if folded > 0.5 {
                    breaks.push([report::point(&w[0].point), report::point(&w[1].point)]);
                }
            }
            Ok(TaskData::Slope(report::Slope {
                frame: frame.clone(),
                per_point,
                continuity_breaks: breaks,
            }))
        }
    }
}

