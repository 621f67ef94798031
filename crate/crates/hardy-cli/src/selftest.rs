//! Full invariant suite at small sizes, reproducible under a fixed seed.

use anyhow::Result;
use faer::{Col, Mat};
use hardy_core::bvp::{self, BVPSpec};
use hardy_core::calculus::{self, QuadraticEvaluator};
use hardy_core::coefficients::{jacobian_coefficients, CoefficientField};
use hardy_core::error::CoreError;
use hardy_core::forms;
use hardy_core::lattice::FrequencyLattice;
use hardy_core::linalg::{self, cr, identity, opnorm, scale, C, ZERO};
use hardy_core::report::BvpKind;
use hardy_core::sampling;
use hardy_core::symbol::{self, BoundaryData, ChiBranch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::OutDir;

#[derive(Serialize)]
pub struct InvariantResult {
    pub name: String,
    pub pass: bool,
    /// Measured residual (or the quantity the bound constrains).
    pub value: f64,
    pub bound: f64,
}

#[derive(Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub results: Vec<InvariantResult>,
}

struct Suite {
    results: Vec<InvariantResult>,
    quiet: bool,
}

impl Suite {
    fn record(&mut self, name: &str, value: f64, bound: f64) {
        let pass = value <= bound && value.is_finite();
        if !self.quiet {
            println!(
                "{} {name}: {value:.3e} (bound {bound:.1e})",
                if pass { "ok  " } else { "FAIL" }
            );
        }
        self.results.push(InvariantResult {
            name: name.into(),
            pass,
            value,
            bound,
        });
    }

    fn record_bool(&mut self, name: &str, pass: bool) {
        if !self.quiet {
            println!("{} {name}", if pass { "ok  " } else { "FAIL" });
        }
        self.results.push(InvariantResult {
            name: name.into(),
            pass,
            value: if pass { 0.0 } else { 1.0 },
            bound: 0.0,
        });
    }
}

pub fn run(seed: u64, out: &OutDir, quiet: bool) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Suite {
        results: Vec::new(),
        quiet,
    };

    // coefficient algebra
    {
        let mut worst_inv: f64 = 0.0;
        let mut worst_transfer: f64 = 0.0;
        for trial in 0..40 {
            let n = 1 + trial % 3;
            let m = 1 + trial % 2;
            let a = sampling::random_accretive_constant(&mut rng, n, m, 0.4);
            let hh = a.hat_transform().unwrap().hat_transform().unwrap();
            worst_inv = worst_inv.max(opnorm(&(hh.sample(0) - a.sample(0))) / a.norm_inf());
            let hat = a.hat_transform().unwrap();
            let t = a.split_triangular().unwrap();
            let f = sampling::random_col(&mut rng, a.dim());
            let uf = &t.upper[0] * &f;
            let lhs = linalg::inner(&(hat.sample(0) * &uf), &uf).re;
            let rhs = linalg::inner(&(a.sample(0) * &f), &f).re;
            worst_transfer = worst_transfer.max((lhs - rhs).abs() / linalg::col_norm(&f).powi(2));
        }
        suite.record("hat involution", worst_inv, 1e-12);
        suite.record("accretivity transfer", worst_transfer, 1e-12);
    }

    // generator assembly and spectral splitting at N = 32
    let size = 32;
    let lattice = FrequencyLattice::new(1, size)?;
    {
        let a = sampling::random_accretive_grid(&mut rng, 1, 1, size, 0.5);
        let ta = calculus::assemble_ta(&a, &lattice)?;
        suite.record(
            "similarity identity",
            calculus::similarity_residual(&a, &lattice, &ta)?,
            1e-12,
        );
        let frame = calculus::hardy_frame(&ta)?;
        let sum = &(&frame.eplus() + &frame.eminus()) + &frame.enull();
        suite.record(
            "spectral completeness",
            opnorm(&(&sum - &identity(frame.dim()))),
            1e-11,
        );
        let sgn = frame.cauchy_operator();
        let range = &frame.eplus() + &frame.eminus();
        suite.record("sgn squared", opnorm(&(&(&sgn * &sgn) - &range)), 1e-10);
        suite.record(
            "bisectoriality margin",
            frame.omega_observed,
            std::f64::consts::FRAC_PI_2,
        );
    }

    // symbol layer
    {
        let mut worst_complete: f64 = 0.0;
        let mut worst_scale: f64 = 0.0;
        let mut worst_rel: f64 = 0.0;
        for trial in 0..20 {
            let n = 1 + trial % 3;
            let a = sampling::random_accretive_constant(&mut rng, n, 1, 0.4);
            let mut xi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            if xi.iter().map(|v| v * v).sum::<f64>() < 1e-3 {
                xi[0] += 1.0;
            }
            let sp = symbol::build_symbol(&a, &xi)?;
            let (pp, pm) = symbol::hardy_symbol_projections(&sp)?;
            worst_complete =
                worst_complete.max(opnorm(&(&(&pp + &pm) - &identity(2))));
            let xi2: Vec<f64> = xi.iter().map(|v| 2.5 * v).collect();
            let sp2 = symbol::build_symbol(&a, &xi2)?;
            let (pp2, _) = symbol::hardy_symbol_projections(&sp2)?;
            worst_scale = worst_scale.max(opnorm(&(&pp - &pp2)));
            let bar_inv = linalg::inverse_refined(&sp.a_comp.bar());
            let lam = symbol::scalar_eigen_relation(&sp, ChiBranch::Plus)?;
            let aa = sp.ahat_comp.a[(0, 0)];
            let bb = sp.ahat_comp.b[(0, 0)];
            let v = Col::from_fn(2, |i| if i == 0 { (lam - bb) / aa } else { cr(1.0) });
            let u = &bar_inv * &v;
            let pu = &pp * &u;
            let mut dev = 0.0;
            for i in 0..2 {
                dev += (pu[i] - u[i]).norm_sqr();
            }
            worst_rel = worst_rel.max(dev.sqrt() / linalg::col_norm(&u));
        }
        suite.record("symbol projection completeness", worst_complete, 1e-12);
        suite.record("symbol scale invariance", worst_scale, 1e-13);
        suite.record("scalar eigen relation", worst_rel, 1e-12);
    }

    // quadratic functional and Poisson solve
    {
        let ident = CoefficientField::constant(1, 1, identity(2))?;
        let ta = calculus::assemble_ta(&ident, &lattice)?;
        let frame = calculus::hardy_frame(&ta)?;
        let eval = QuadraticEvaluator::new(&frame);
        let range = &frame.eplus() + &frame.eminus();
        let g = sampling::random_col(&mut rng, frame.dim());
        let f = &range * &g;
        suite.record("quadratic ratio at identity", (eval.ratio(&f) - 0.5).abs(), 1e-10);

        let u: Vec<C> = (0..size)
            .map(|j| cr((2.0 * std::f64::consts::PI * j as f64 / size as f64).cos()))
            .collect();
        let rep = symbol::solve_constant(
            &ident,
            BvpKind::Dir,
            BoundaryData::Scalar(&u),
            &lattice,
            &[0.7],
        )?;
        let pot = rep.potential.as_ref().unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..size {
            let x = 2.0 * std::f64::consts::PI * j as f64 / size as f64;
            let expect = (-0.7f64).exp() * x.cos();
            num += (pot[0][j] - cr(expect)).norm_sqr();
            den += expect * expect;
        }
        suite.record("Poisson semigroup solve", (num / den).sqrt(), 1e-10);
        suite.record("solve boundary residual", rep.residuals.boundary, 1e-10);
    }

    // Rellich identities
    {
        let g: Vec<f64> = (0..size)
            .map(|j| 0.3 * (2.0 * std::f64::consts::PI * j as f64 / size as f64).sin())
            .collect();
        let field = jacobian_coefficients(&g, 1, 1, size)?;
        let probe = bvp::RellichProbe::new(&field, &lattice)?;
        let ta = calculus::assemble_ta(&field, &lattice)?;
        let frame = calculus::hardy_frame(&ta)?;
        let q = frame.plus_basis();
        let mut worst: f64 = 0.0;
        for j in 0..q.ncols() {
            let f = Col::from_fn(q.nrows(), |i| q[(i, j)]);
            worst = worst.max(probe.residual(&f).0);
        }
        suite.record("Rellich identity", worst, 1e-9);

        let a = sampling::random_hermitean_constant(&mut rng, 1, 2, 0.4);
        let sp = symbol::build_symbol(&a, &[1.0])?;
        let (pp, _) = symbol::hardy_symbol_projections(&sp)?;
        let gcol = sampling::random_col(&mut rng, 4);
        let f = &pp * &gcol;
        let res = symbol::reverse_rellich_residual(&a, &[1.0], &f)?;
        suite.record(
            "reverse Rellich",
            res / linalg::col_norm(&f).powi(2).max(1e-300),
            1e-11,
        );
    }

    // block structure and double layer
    {
        let field = sampling::random_block_grid(&mut rng, 1, 1, size, 0.45);
        let rep = bvp::block_structure_check(&field, &lattice)?;
        suite.record("block off-diagonality", rep.offdiag_norm, 1e-10);
        suite.record("block anticommutator", rep.anticommutator, 1e-10);
        let dl = bvp::double_layer(&field, bvp::LayerPath::Neu, &lattice)?;
        suite.record("block double layer vanishes", opnorm(&dl.k), 1e-10);
    }

    // forms layer
    {
        let mut worst_sq: f64 = 0.0;
        let mut worst_anti: f64 = 0.0;
        for n in 1..=3usize {
            for k in 1..=n.min(2) {
                let mut xi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                if xi.iter().map(|v| v * v).sum::<f64>() < 1e-3 {
                    xi[0] += 1.0;
                }
                worst_sq = worst_sq.max(forms::dxi_square_residual(&xi, n, k)?);
                let v: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
                let w: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
                let (r1, r2) = forms::anticommutator_residuals(&v, &w, n, k)?;
                worst_anti = worst_anti.max(r1).max(r2);
            }
        }
        suite.record("forms symbol square", worst_sq, 1e-12);
        suite.record("forms anticommutators", worst_anti, 1e-13);
    }

    // negative control: the non-accretive fixture must be refused
    {
        let bad = CoefficientField::constant(
            1,
            1,
            Mat::from_fn(2, 2, |i, j| {
                if i == j && i == 0 {
                    cr(-1.0)
                } else if i == j {
                    cr(1.0)
                } else {
                    ZERO
                }
            }),
        )?;
        let refused = matches!(
            bad.accretivity_report(&lattice),
            Err(CoreError::NotAccretive { .. })
        );
        suite.record_bool("non-accretive fixture refused", refused);
        let spec = BVPSpec {
            which: BvpKind::Neu,
            field: bad,
            data: vec![ZERO; size],
            t_levels: vec![],
        };
        let refused_solve = matches!(bvp::solve_bvp(&spec), Err(CoreError::NotAccretive { .. }));
        suite.record_bool("non-accretive solve refused", refused_solve);
    }

    // perturbation probe guard
    {
        let ident = CoefficientField::constant(1, 1, identity(2))?;
        let f = sampling::random_col(&mut rng, 2 * size);
        let rep = calculus::lipschitz_probe(
            &ident,
            &ident,
            &f,
            calculus::NormSelector::Trace,
            &lattice,
        )?;
        suite.record_bool("coincident-field probe guarded", rep.degenerate);
        let dir = sampling::random_direction(&mut rng, 2);
        let a2 = CoefficientField::constant(1, 1, &identity(2) + &scale(cr(1e-3), &dir))?;
        let r1 = calculus::lipschitz_probe(&ident, &a2, &f, calculus::NormSelector::Trace, &lattice)?
            .ratio;
        let a3 = CoefficientField::constant(1, 1, &identity(2) + &scale(cr(5e-4), &dir))?;
        let r2 = calculus::lipschitz_probe(&ident, &a3, &f, calculus::NormSelector::Trace, &lattice)?
            .ratio;
        suite.record("perturbation ratio stability", (r1 / r2).max(r2 / r1), 2.0);
    }

    let passed = suite.results.iter().filter(|r| r.pass).count();
    let failed = suite.results.len() - passed;
    let report = SelftestReport {
        seed,
        passed,
        failed,
        results: suite.results,
    };
    out.write_json("selftest.json", &report)?;
    if !quiet {
        println!("selftest: {passed} passed, {failed} failed");
    }
    Ok(failed == 0)
}
