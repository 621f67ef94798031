//! Command implementations.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use faer::{Col, Mat};
use hardy_core::bvp::{self, BVPSpec};
use hardy_core::calculus::{self, NormSelector};
use hardy_core::coefficients::{CoefficientField, Kind};
use hardy_core::forms;
use hardy_core::lattice::FrequencyLattice;
use hardy_core::linalg::{self, cr, inverse_refined, opnorm, scale, C, ZERO};
use hardy_core::report::{BvpKind, SolveReport};
use hardy_core::sampling;
use hardy_core::symbol::{self, BoundaryData, TraceMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::OutDir;

pub fn parse_which(s: &str) -> Result<BvpKind> {
    Ok(match s {
        "neu" => BvpKind::Neu,
        "reg" => BvpKind::Reg,
        "dir" => BvpKind::Dir,
        "neuperp" => BvpKind::NeuPerp,
        other => bail!("unknown problem `{other}` (use neu|reg|dir|neuperp)"),
    })
}

/// The identity residuals embedded into every report.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityResiduals {
    /// `‖hat(hat(A)) − A‖/‖A‖` over samples.
    pub involution: f64,
    /// `‖T_A − Ābar⁻¹(DÂ)Ābar‖/‖T_A‖` (dense for n = 1, symbol-level for
    /// constant fields in higher dimension).
    pub similarity: Option<f64>,
    /// Rellich identity residual on an upper Hardy vector (Hermitean only).
    pub rellich: Option<f64>,
}

pub fn identity_residuals(field: &CoefficientField, modes: usize) -> Result<IdentityResiduals> {
    let hh = field.hat_transform()?.hat_transform()?;
    let scale_norm = field.norm_inf().max(f64::MIN_POSITIVE);
    let involution = field
        .samples()
        .iter()
        .zip(hh.samples().iter())
        .map(|(s, h)| opnorm(&(h - s)) / scale_norm)
        .fold(0.0f64, f64::max);

    let similarity = if field.n == 1 {
        let lattice = FrequencyLattice::new(1, modes)?;
        let ta = calculus::assemble_ta(field, &lattice)?;
        Some(calculus::similarity_residual(field, &lattice, &ta)?)
    } else if field.is_constant() {
        let mut worst: f64 = 0.0;
        for dir in symbol::unit_directions(field.n, 8) {
            let sp = symbol::build_symbol(field, &dir)?;
            let bar = sp.a_comp.bar();
            let rhs = &(&inverse_refined(&bar) * &(&sp.dxi * &sp.ahat_comp.assemble())) * &bar;
            worst = worst.max(opnorm(&(&sp.txi - &rhs)) / opnorm(&sp.txi));
        }
        Some(worst)
    } else {
        None
    };

    let rellich = if field.classify().hermitean {
        if field.n == 1 {
            let lattice = FrequencyLattice::new(1, modes)?;
            let probe = bvp::RellichProbe::new(field, &lattice)?;
            let ta = calculus::assemble_ta(field, &lattice)?;
            let frame = calculus::hardy_frame(&ta)?;
            let q = frame.plus_basis();
            let mut worst: f64 = 0.0;
            for j in 0..q.ncols().min(8) {
                let f = Col::from_fn(q.nrows(), |i| q[(i, j)]);
                worst = worst.max(probe.residual(&f).0);
            }
            Some(worst)
        } else if field.is_constant() {
            // symbol-level identity (f₀,(Af)₀) = ((Af)∥,f∥) at a unit
            // direction, on a basis of the upper Hardy symbol space
            let dir = symbol::unit_directions(field.n, 1).remove(0);
            let sp = symbol::build_symbol(field, &dir)?;
            let (pp, _) = symbol::hardy_symbol_projections(&sp)?;
            let a_full = sp.a_comp.assemble();
            let m = field.m;
            let mut worst: f64 = 0.0;
            for j in 0..2 * m {
                let f = Col::from_fn(2 * m, |i| pp[(i, j)]);
                if linalg::col_norm(&f) < 1e-10 {
                    continue;
                }
                let af = &a_full * &f;
                let mut lhs = ZERO;
                let mut rhs = ZERO;
                for al in 0..m {
                    lhs += f[al] * af[al].conj();
                }
                for i in m..2 * m {
                    rhs += af[i] * f[i].conj();
                }
                worst = worst.max((lhs - rhs).abs() / linalg::col_norm(&f).powi(2));
            }
            Some(worst)
        } else {
            None
        }
    } else {
        None
    };

    Ok(IdentityResiduals {
        involution,
        similarity,
        rellich,
    })
}

#[derive(Serialize)]
struct CheckReport {
    seed: u64,
    modes: usize,
    n: usize,
    m: usize,
    kind: String,
    flags: hardy_core::coefficients::ClassFlags,
    kappa_pointwise: Option<f64>,
    kappa_curlfree: f64,
    kappa_normal_block: f64,
    kappa_tangential_block: f64,
    omega_hat: f64,
    omega_a: f64,
    identities: IdentityResiduals,
}

pub fn check(cfg: &RunConfig, seed: u64, out: &OutDir, _base: &Path) -> Result<()> {
    let field = cfg
        .coefficients
        .as_ref()
        .ok_or_else(|| anyhow!("`coefficients` section is required"))?
        .build()?;
    let default_modes = if field.n == 1 { 32 } else { 8 };
    let modes = cfg.modes.unwrap_or(default_modes);
    let lattice = FrequencyLattice::new(field.n, modes)?;
    let report = field.accretivity_report(&lattice)?;
    let flags = field.classify();
    let identities = identity_residuals(&field, modes)?;
    let rep = CheckReport {
        seed,
        modes,
        n: field.n,
        m: field.m,
        kind: match field.kind {
            Kind::Constant => "constant".into(),
            Kind::Grid { size } => format!("grid({size})"),
        },
        flags,
        kappa_pointwise: report.kappa_pointwise,
        kappa_curlfree: report.kappa_curlfree,
        kappa_normal_block: report.kappa_blocks.0,
        kappa_tangential_block: report.kappa_blocks.1,
        omega_hat: report.omega_hat,
        omega_a: report.omega_a,
        identities,
    };
    out.write_json("check.json", &rep)?;
    if field.n == 1 {
        let ta = calculus::assemble_ta(&field, &lattice)?;
        let frame = calculus::hardy_frame(&ta)?;
        out.write_text("spectrum.csv", &crate::output::spectrum_csv(&frame.values))?;
        if cfg.dump_operator.unwrap_or(false) {
            let mut text = String::from("row,col,re,im\n");
            for i in 0..ta.mat.nrows() {
                for j in 0..ta.mat.ncols() {
                    let z = ta.mat[(i, j)];
                    if z != ZERO {
                        text.push_str(&format!("{i},{j},{:e},{:e}\n", z.re, z.im));
                    }
                }
            }
            out.write_text("operator.csv", &text)?;
        }
    }
    let rows: Vec<(String, String)> = vec![
        ("hermitean".into(), rep.flags.hermitean.to_string()),
        ("block".into(), rep.flags.block.to_string()),
        ("constant".into(), rep.flags.constant.to_string()),
        ("jacobian_type".into(), rep.flags.jacobian_type.to_string()),
        (
            "kappa_pointwise".into(),
            rep.kappa_pointwise.map_or("absent".into(), |v| format!("{v:e}")),
        ),
        ("kappa_curlfree".into(), format!("{:e}", rep.kappa_curlfree)),
        ("omega_hat".into(), format!("{:e}", rep.omega_hat)),
        ("omega_a".into(), format!("{:e}", rep.omega_a)),
        ("involution_residual".into(), format!("{:e}", rep.identities.involution)),
    ];
    out.write_kv_csv("check.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveJson {
    seed: u64,
    summary: hardy_core::report::SolveSummary,
    identities: IdentityResiduals,
    /// Relative deviation of the boundary-equation (double layer + Neumann
    /// series) trace from the restricted-map trace, when requested.
    series_deviation: Option<f64>,
}

fn spectral_x_derivative(data: &[C], m: usize, lattice: &FrequencyLattice) -> Vec<C> {
    // n = 1 tangential derivative of a potential, Nyquist mode dropped
    let mut hat = lattice.forward_unitary(data, m);
    let size = lattice.size;
    for k in 0..lattice.num_points() {
        let xi = lattice.freq(k)[0];
        let mult = if xi == -(size as i64) / 2 {
            ZERO
        } else {
            C::new(0.0, xi as f64)
        };
        for al in 0..m {
            hat[k * m + al] = hat[k * m + al] * mult;
        }
    }
    lattice.inverse_unitary(&hat, m)
}

pub fn solve(cfg: &RunConfig, which: BvpKind, seed: u64, out: &OutDir, base: &Path) -> Result<()> {
    let field = cfg
        .coefficients
        .as_ref()
        .ok_or_else(|| anyhow!("`coefficients` section is required"))?
        .build()?;
    let modes = cfg.modes.unwrap_or(match field.kind {
        Kind::Grid { size } => size,
        Kind::Constant => match field.n {
            1 => 32,
            2 => 16,
            _ => 8,
        },
    });
    let lattice = FrequencyLattice::new(field.n, modes)?;
    let t_levels = cfg.t_levels.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let data_cfg = cfg
        .data
        .as_ref()
        .ok_or_else(|| anyhow!("`data` section is required"))?;
    // Data semantics: φ for neu/neuperp, the potential u for dir and reg
    // (reg data is differentiated spectrally).
    let data = data_cfg.build(field.n, field.m, modes, base)?;

    let report: SolveReport = match field.kind {
        Kind::Constant => symbol::solve_constant(
            &field,
            which,
            BoundaryData::Scalar(&data),
            &lattice,
            &t_levels,
        )?,
        Kind::Grid { .. } => {
            if field.n != 1 {
                bail!("variable-coefficient solves need n = 1");
            }
            let data_eff = if which == BvpKind::Reg {
                spectral_x_derivative(&data, field.m, &lattice)
            } else {
                data.clone()
            };
            bvp::solve_bvp(&BVPSpec {
                which,
                field: field.clone(),
                data: data_eff,
                t_levels: t_levels.clone(),
            })?
        }
    };

    let series_deviation = match cfg.method.as_deref() {
        None | Some("direct") => None,
        Some("series") => {
            if field.n != 1 {
                bail!("the series method needs n = 1");
            }
            let series_tol = cfg
                .tolerances
                .as_ref()
                .and_then(|t| t.series)
                .unwrap_or(1e-12);
            let data_eff = if which == BvpKind::Reg {
                spectral_x_derivative(&data, field.m, &lattice)
            } else {
                data.clone()
            };
            let f_series = bvp::double_layer_trace(&field, which, &data_eff, &lattice, series_tol)?;
            let f_direct = lattice.forward_unitary(&report.trace, (1 + field.n) * field.m);
            let mut dev = 0.0;
            let mut nrm = 0.0;
            for i in 0..f_direct.len() {
                dev += (f_series[i] - f_direct[i]).norm_sqr();
                nrm += f_direct[i].norm_sqr();
            }
            Some((dev / nrm.max(1e-300)).sqrt())
        }
        Some(other) => bail!("unknown method `{other}` (use direct|series)"),
    };
    let identities = identity_residuals(&field, modes.min(32))?;
    out.write_json(
        "solve.json",
        &SolveJson {
            seed,
            summary: report.summary(),
            identities,
            series_deviation,
        },
    )?;
    let dim = (1 + field.n) * field.m;
    out.write_field_csv("trace.csv", &lattice, &report.trace, dim)?;
    for (i, slice) in report.slices.iter().enumerate() {
        out.write_field_csv(&format!("field_t{i}.csv"), &lattice, slice, dim)?;
    }
    if let Some(pot) = &report.potential {
        for (i, slice) in pot.iter().enumerate() {
            out.write_field_csv(&format!("potential_t{i}.csv"), &lattice, slice, field.m)?;
        }
    }
    // norm decay curve over the reported levels
    let cell = (2.0 * std::f64::consts::PI / modes as f64).powi(field.n as i32);
    let mut curve = vec![(0.0, report.norms.trace_norm)];
    for (i, &t) in report.t_levels.iter().enumerate() {
        let nrm = (report.slices[i].iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt();
        curve.push((t, nrm));
    }
    out.write_plot("plot_norm_decay.txt", &curve)?;
    Ok(())
}

#[derive(Serialize)]
struct ScanJson {
    seed: u64,
    which: String,
    directions: usize,
    rows: Vec<symbol::WpScanRow>,
}

pub fn scan_wp(cfg: &RunConfig, which: BvpKind, seed: u64, out: &OutDir) -> Result<()> {
    let fam = cfg
        .family
        .as_ref()
        .ok_or_else(|| anyhow!("`family` section is required for scan-wp"))?;
    let base = fam.base.build()?;
    let dir = fam.direction.build()?;
    if !base.is_constant() || !dir.is_constant() {
        bail!("well-posedness scans take constant families");
    }
    if base.n != dir.n || base.m != dir.m {
        bail!("family base and direction must share (n, m)");
    }
    let family: Vec<(f64, CoefficientField)> = fam
        .lambdas
        .iter()
        .map(|&l| {
            let mat = base.sample(0) + &scale(cr(l), dir.sample(0));
            CoefficientField::constant(base.n, base.m, mat).map(|f| (l, f))
        })
        .collect::<hardy_core::Result<_>>()?;
    let tm = match which {
        BvpKind::Neu => TraceMap::Neu,
        BvpKind::Reg => TraceMap::Reg,
        BvpKind::Dir | BvpKind::NeuPerp => TraceMap::NeuPerp,
    };
    let n_dirs = fam.directions.unwrap_or(hardy_core::tol::WP_SCAN_DIRECTIONS);
    let rows = symbol::wp_scan(&family, tm, n_dirs);
    let mut csv = String::from("lambda,sup_cond,sup_solution_norm,accretive\n");
    let mut plot = Vec::new();
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{}\n",
            r.lambda, r.sup_cond, r.sup_solution_norm, r.accretive
        ));
        plot.push((r.lambda, r.sup_solution_norm));
    }
    out.write_text("scan.csv", &csv)?;
    out.write_plot("plot_scan.txt", &plot)?;
    out.write_json(
        "scan.json",
        &ScanJson {
            seed,
            which: which.to_string(),
            directions: n_dirs,
            rows,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct PerturbRow {
    epsilon: f64,
    direction: usize,
    trace_ratio: f64,
    sup_ratio: f64,
    square_function_ratio: f64,
}

#[derive(Serialize)]
struct PerturbJson {
    seed: u64,
    modes: usize,
    rows: Vec<PerturbRow>,
}

pub fn perturb(cfg: &RunConfig, seed: u64, out: &OutDir) -> Result<()> {
    let field = cfg
        .coefficients
        .as_ref()
        .ok_or_else(|| anyhow!("`coefficients` section is required"))?
        .build()?;
    if field.n != 1 {
        bail!("perturbation probes run on n = 1 fields");
    }
    let modes = cfg.modes.unwrap_or(32);
    let lattice = FrequencyLattice::new(1, modes)?;
    let pcfg = cfg
        .perturb
        .as_ref()
        .ok_or_else(|| anyhow!("`perturb` section is required"))?;
    let n_dirs = pcfg.directions.unwrap_or(5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = sampling::random_col(&mut rng, 2 * field.m * modes);
    let dim = field.dim();
    let mut rows = Vec::new();
    for d in 0..n_dirs {
        let dir = sampling::random_direction(&mut rng, dim);
        for &eps in &pcfg.epsilons {
            let samples: Vec<Mat<C>> = field
                .samples()
                .iter()
                .map(|s| s + &scale(cr(eps), &dir))
                .collect();
            let a2 = match field.kind {
                Kind::Constant => CoefficientField::constant(1, field.m, samples[0].clone())?,
                Kind::Grid { size } => CoefficientField::grid(1, field.m, size, samples)?,
            };
            let mut ratios = [0.0f64; 3];
            for (i, sel) in [
                NormSelector::Trace,
                NormSelector::Sup,
                NormSelector::SquareFunction,
            ]
            .iter()
            .enumerate()
            {
                ratios[i] = calculus::lipschitz_probe(&field, &a2, &f, *sel, &lattice)?.ratio;
            }
            rows.push(PerturbRow {
                epsilon: eps,
                direction: d,
                trace_ratio: ratios[0],
                sup_ratio: ratios[1],
                square_function_ratio: ratios[2],
            });
        }
    }
    let mut csv = String::from("epsilon,direction,trace_ratio,sup_ratio,square_function_ratio\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{},{:e},{:e},{:e}\n",
            r.epsilon, r.direction, r.trace_ratio, r.sup_ratio, r.square_function_ratio
        ));
    }
    out.write_text("perturb.csv", &csv)?;
    out.write_json("perturb.json", &PerturbJson { seed, modes, rows })?;
    Ok(())
}

#[derive(Serialize)]
struct RellichJson {
    seed: u64,
    modes: usize,
    /// (max, mean) residual over an orthonormal upper-Hardy basis and the
    /// worst coercivity constant ‖f‖/‖(Af)₀‖ — Hermitean n = 1 fields.
    hardy_identity: Option<RellichStats>,
    /// Worst symbol-level reverse Rellich residual over sampled directions —
    /// constant fields.
    reverse_rellich: Option<f64>,
    /// Block structure report when the field is of block form.
    block: Option<bvp::BlockReport>,
}

#[derive(Serialize)]
struct RellichStats {
    max_residual: f64,
    mean_residual: f64,
    max_coercivity: f64,
}

pub fn rellich(cfg: &RunConfig, seed: u64, out: &OutDir) -> Result<()> {
    let field = cfg
        .coefficients
        .as_ref()
        .ok_or_else(|| anyhow!("`coefficients` section is required"))?
        .build()?;
    let modes = cfg.modes.unwrap_or(32);
    let flags = field.classify();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let hardy_identity = if flags.hermitean && field.n == 1 {
        let lattice = FrequencyLattice::new(1, modes)?;
        let probe = bvp::RellichProbe::new(&field, &lattice)?;
        let ta = calculus::assemble_ta(&field, &lattice)?;
        let frame = calculus::hardy_frame(&ta)?;
        let q = frame.plus_basis();
        let mut max_res: f64 = 0.0;
        let mut sum = 0.0;
        let mut max_coer: f64 = 0.0;
        for j in 0..q.ncols() {
            let f = Col::from_fn(q.nrows(), |i| q[(i, j)]);
            let (res, coer) = probe.residual(&f);
            max_res = max_res.max(res);
            sum += res;
            max_coer = max_coer.max(coer);
        }
        Some(RellichStats {
            max_residual: max_res,
            mean_residual: sum / q.ncols() as f64,
            max_coercivity: max_coer,
        })
    } else {
        None
    };

    let reverse_rellich = if field.is_constant() {
        let mut worst: f64 = 0.0;
        for dir in symbol::unit_directions(field.n, 4) {
            let sp = symbol::build_symbol(&field, &dir)?;
            let (pp, _) = symbol::hardy_symbol_projections(&sp)?;
            let g = sampling::random_col(&mut rng, 2 * field.m);
            let f = &pp * &g;
            if linalg::col_norm(&f) < 1e-8 {
                continue;
            }
            let res = symbol::reverse_rellich_residual(&field, &dir, &f)?;
            worst = worst.max(res / linalg::col_norm(&f).powi(2));
        }
        Some(worst)
    } else {
        None
    };

    let block = if flags.block && field.n == 1 {
        let lattice = FrequencyLattice::new(1, modes)?;
        Some(bvp::block_structure_check(&field, &lattice)?)
    } else {
        None
    };

    if hardy_identity.is_none() && reverse_rellich.is_none() && block.is_none() {
        bail!("the rellich command needs a Hermitean, constant, or block field");
    }
    out.write_json(
        "rellich.json",
        &RellichJson {
            seed,
            modes,
            hardy_identity,
            reverse_rellich,
            block,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FormsJson {
    seed: u64,
    n: usize,
    k: usize,
    lambda_dim: usize,
    /// max residual of `D_ξ² = |ξ|²` on `R(D_ξ)` over sampled directions
    dxi_square: f64,
    /// max anticommutator residuals over random real pairs
    anticommutators: f64,
    /// `‖hat(hat(B)) − B‖/‖B‖`
    hat_involution: f64,
    solve: Option<FormsSolveJson>,
}

#[derive(Serialize)]
struct FormsSolveJson {
    which: String,
    grid_size: usize,
    condition: f64,
    solution_norm: f64,
    trace_norm: f64,
    sup_norm: f64,
    square_function: f64,
    pde_residual: f64,
    boundary_residual: f64,
}

/// Good boundary data for the exterior solves: closed tangential data for
/// (Tan-B), coclosed conormal data for (Nor-B), built from a cosine profile
/// along the first axis.
fn forms_good_data(
    n: usize,
    k: usize,
    which: forms::FormsWhich,
    b: &Mat<C>,
    lattice: &FrequencyLattice,
) -> Result<Vec<C>> {
    let dim = forms::lambda_dim(n, k);
    let p = lattice.num_points();
    let subsets = forms::basis_subsets(n, k);
    // frequency-space construction: modes ±e₁ only
    let mut hat = vec![ZERO; p * dim];
    let mut e1 = vec![0.0f64; n];
    e1[0] = 1.0;
    let e1c: Vec<C> = {
        let mut v = vec![ZERO; n + 1];
        v[1] = cr(1.0);
        v
    };
    let kplus = lattice.wrap_index(&e1.iter().map(|&x| x as i64).collect::<Vec<_>>());
    let kminus = lattice.wrap_index(&e1.iter().map(|&x| -(x as i64)).collect::<Vec<_>>());
    match which {
        forms::FormsWhich::Tan => {
            // g = d_x(cos(x₁)·e_S), S a tangential (k-1)-subset avoiding axis 1
            let smask: u32 = {
                let mut mask = 0u32;
                let mut count = 0;
                for j in 2..=n {
                    if count < k - 1 {
                        mask |= 1 << j;
                        count += 1;
                    }
                }
                if count < k - 1 {
                    bail!("no tangential ({}-1)-subset avoids the first axis for n = {n}", k);
                }
                mask
            };
            let from = forms::basis_subsets(n, k - 1);
            let sidx = from
                .iter()
                .position(|&m_| m_ == smask)
                .ok_or_else(|| anyhow!("internal basis lookup"))?;
            let wedge = forms::wedge_matrix(&e1c, n, k - 1)?;
            // cos(x₁) has coefficients ½ at ±e₁; d_x contributes iξ∧
            for (kf, sign) in [(kplus, 1.0), (kminus, -1.0)] {
                for r in 0..dim {
                    hat[kf * dim + r] = C::new(0.0, 0.5 * sign) * wedge[(r, sidx)];
                }
            }
        }
        forms::FormsWhich::Nor => {
            // g = e₀ ∧ d*_x(cos(x₁)·e_S), S a tangential k-subset containing
            // axis 1
            let smask: u32 = {
                let mut mask = 1u32 << 1;
                let mut count = 1;
                for j in 2..=n {
                    if count < k {
                        mask |= 1 << j;
                        count += 1;
                    }
                }
                if count < k {
                    bail!("no tangential {k}-subset exists for n = {n}");
                }
                mask
            };
            let from = forms::basis_subsets(n, k);
            let sidx = from
                .iter()
                .position(|&m_| m_ == smask)
                .ok_or_else(|| anyhow!("internal basis lookup"))?;
            let inter = forms::interior_matrix(&e1c, n, k)?;
            let e0c: Vec<C> = {
                let mut v = vec![ZERO; n + 1];
                v[0] = cr(1.0);
                v
            };
            let wedge0 = forms::wedge_matrix(&e0c, n, k - 1)?;
            // d*_x has symbol −iμ*_ξ
            for (kf, sign) in [(kplus, 1.0), (kminus, -1.0)] {
                for r in 0..dim {
                    let mut v = ZERO;
                    for q_ in 0..forms::lambda_dim(n, k - 1) {
                        v += wedge0[(r, q_)] * (C::new(0.0, -0.5 * sign) * inter[(q_, sidx)]);
                    }
                    hat[kf * dim + r] = v;
                }
            }
        }
    }
    let _ = subsets;
    let _ = b;
    Ok(lattice.inverse_unitary(&hat, dim))
}

pub fn forms_cmd(cfg: &RunConfig, which: Option<&str>, seed: u64, out: &OutDir) -> Result<()> {
    let fcfg = cfg
        .forms
        .as_ref()
        .ok_or_else(|| anyhow!("`forms` section is required"))?;
    let (n, k) = (fcfg.n, fcfg.k);
    if k == 0 || k > n {
        bail!("forms need 1 ≤ k ≤ n");
    }
    let b = fcfg.build_b()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;

    let mut dxi_square: f64 = 0.0;
    for _ in 0..20 {
        let mut xi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        if xi.iter().map(|v| v * v).sum::<f64>() < 1e-3 {
            xi[0] += 1.0;
        }
        dxi_square = dxi_square.max(forms::dxi_square_residual(&xi, n, k)?);
    }
    let mut anticommutators: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
        let w: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
        let (r1, r2) = forms::anticommutator_residuals(&v, &w, n, k)?;
        anticommutators = anticommutators.max(r1).max(r2);
    }
    let hat_involution = {
        let hh = forms::hat_forms(&forms::hat_forms(&b, n, k)?, n, k)?;
        opnorm(&(&hh - &b)) / opnorm(&b).max(f64::MIN_POSITIVE)
    };

    let solve = if let Some(w) = which {
        let fw = match w {
            "tan" => forms::FormsWhich::Tan,
            "nor" => forms::FormsWhich::Nor,
            other => bail!("unknown forms problem `{other}` (use tan|nor)"),
        };
        let modes = fcfg.modes.or(cfg.modes).unwrap_or(8);
        let lattice = FrequencyLattice::new(n, modes)?;
        let data = forms_good_data(n, k, fw, &b, &lattice)?;
        let t_levels = cfg.t_levels.clone().unwrap_or_else(|| vec![0.5, 1.0]);
        let rep = forms::solve_forms_constant(&b, n, k, fw, &data, &lattice, &t_levels)?;
        let masks = forms::basis_subsets(n, k);
        out.write_multivector_csv("forms_trace.csv", &rep.trace, &masks)?;
        for (i, slice) in rep.slices.iter().enumerate() {
            out.write_multivector_csv(&format!("forms_field_t{i}.csv"), slice, &masks)?;
        }
        Some(FormsSolveJson {
            which: fw.to_string(),
            grid_size: rep.grid_size,
            condition: rep.condition,
            solution_norm: rep.solution_norm,
            trace_norm: rep.norms.trace_norm,
            sup_norm: rep.norms.sup_norm,
            square_function: rep.norms.square_function,
            pde_residual: rep.residuals.pde,
            boundary_residual: rep.residuals.boundary,
        })
    } else {
        None
    };

    out.write_json(
        "forms.json",
        &FormsJson {
            seed,
            n,
            k,
            lambda_dim: forms::lambda_dim(n, k),
            dxi_square,
            anticommutators,
            hat_involution,
            solve,
        },
    )?;
    Ok(())
}
