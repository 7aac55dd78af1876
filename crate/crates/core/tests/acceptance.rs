//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero on any failure other than the pinned `b_h` corner at `r = 3`.

use std::time::{Duration, Instant};

use channel_euler::analytic_norms::{grad_embedding_ratio, DerivativeTable, NormParams, RadiusSchedule};
use channel_euler::combinatorics::{full_suite, sup_ah, sup_al, CertificateReport, EARLY_INDEX};
use channel_euler::config::parse_config;
use channel_euler::estimates::{
    apriori_check, leibniz_defect_grid, leibniz_defect_mode, max_ratio, pressure_estimate_suite, product_suite,
    s_alpha_mode, NormSample,
};
use channel_euler::grid_field::{GridField, VectorGridField};
use channel_euler::mode_field::{ModeField, VectorModeField, VerticalBasis::*};
use channel_euler::pressure::{
    build_pressure_problem_mode, manufactured_convergence, solve_neumann_grid, solve_neumann_mode, BoundaryForm,
    GridNeumannProblem,
};
use channel_euler::solver::{
    contraction_schedule, picard_run, run, shift_x1, step_rk4, uniform_bound_constant, PicardSettings, RunSpec,
    SolverSettings, SolverState,
};
use channel_euler::suites::{random_velocity_suite, BaseFlow, RandomSpec, DEFAULT_SEED};

struct Outcome {
    pass: bool,
    detail: String,
    /// A failure that matches a documented counterexample exactly.
    known: bool,
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let reports = full_suite(200, &[3, 4, 5]);
    let elapsed = start.elapsed();
    let failed: Vec<&CertificateReport> = reports.iter().filter(|r| !r.verified).collect();
    let fast = elapsed < Duration::from_secs(30);
    // the one counterexample: |alpha| = r = 3, |beta| = 2 gives tau^(-1/2)
    let pinned = failed.len() == 2
        && failed
            .iter()
            .all(|r| r.range.starts_with("r = 3,") && r.violation_count == 1)
        && failed
            .iter()
            .any(|r| r.violations[0] == "(|alpha|, |beta|) = (3, 2): exponent -1/2")
        && failed
            .iter()
            .any(|r| r.violations[0] == "(i + j, n + l) = (3, 2): exponent -1/2");
    let listing: Vec<String> = failed
        .iter()
        .map(|r| format!("{} [{}]: {}", r.name, r.range, r.violations.join("; ")))
        .collect();
    Outcome {
        pass: failed.is_empty() && fast,
        detail: format!(
            "{} sweeps, {} with violations{}{}; {:.2} s (limit 30 s)",
            reports.len(),
            failed.len(),
            if listing.is_empty() { "" } else { ": " },
            listing.join(" | "),
            secs(elapsed)
        ),
        known: pinned && fast,
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [3u32, 4, 5] {
        for (name, short, long) in [
            ("a_l", sup_al(200, r), sup_al(400, r)),
            ("a_h", sup_ah(200, r), sup_ah(400, r)),
        ] {
            let same = short.sup == long.sup && short.at == long.at;
            let early = long.last_increase <= EARLY_INDEX;
            ok &= same && early;
            parts.push(format!("{name}^2 r={r}: {} at {:?}", long.sup, long.at));
        }
    }
    Outcome {
        pass: ok,
        detail: format!(
            "sup over 200 = sup over 400, attained by index {EARLY_INDEX}: {}",
            parts.join(", ")
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let table = manufactured_convergence(2, &[8, 16, 24, 32]).unwrap();
    let table4 = manufactured_convergence(4, &[16, 32]).unwrap();
    let worst_resolved = table[1..].iter().chain(&table4).map(|r| r.error).fold(0.0, f64::max);
    let decay = table[0].error / table[1].error.max(f64::MIN_POSITIVE);

    // inflow pressure problem, closed form against tau
    let ubar = BaseFlow::Transpiration {
        speed: 1.0,
        amplitude: 0.05,
    }
    .field();
    let v = VectorModeField::from_stream_function(&ModeField::sin_x1(1, Sin(1), 0.1).add(&ModeField::cos_x1(
        2,
        Sin(2),
        0.05,
    )));
    let pb = build_pressure_problem_mode(&v, &ubar, BoundaryForm::FullTrace).unwrap();
    let pm = solve_neumann_mode(&pb).unwrap();
    let mut cross = 0.0f64;
    let mut mean = 0.0f64;
    for (k, p) in [(4, 24), (8, 32)] {
        let pg = solve_neumann_grid(&GridNeumannProblem::from_mode(&pb, k, p)).unwrap();
        let want = GridField::from_mode(&pm.p, k, p).0;
        cross = cross.max(pg.p.sub(&want).l2_norm() / want.l2_norm());
        mean = mean.max(pg.residual.mean / pg.p.l2_norm());
    }
    mean = mean.max(pm.residual.mean / pm.p.l2_norm());
    let elapsed = start.elapsed();
    let pass =
        worst_resolved < 1e-10 && decay > 1e3 && cross < 1e-8 && mean <= 1e-12 && elapsed < Duration::from_secs(5);
    Outcome {
        pass,
        detail: format!(
            "rel error {worst_resolved:.2e} for K >= 2, P >= 16 (< 1e-10); error(8)/error(16) = {decay:.2e} (> 1e3); \
             mode/grid {cross:.2e} (< 1e-8); |mean|/||p|| {mean:.1e} (<= 1e-12); {:.2} s (< 5 s)",
            secs(elapsed)
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let suite = random_velocity_suite(
        DEFAULT_SEED,
        20,
        &RandomSpec {
            max_k: 3,
            max_m: 3,
            amplitude: 1.0,
        },
        false,
    );
    let at = |tau: f64, n: usize| {
        let p = NormParams::new(3, tau, 0.1, n).unwrap();
        max_ratio(&pressure_estimate_suite(&suite, &p).unwrap(), "pressure")
    };
    let base = at(0.1, 8);
    let refined = at(0.1, 10);
    let halved = at(0.05, 8);
    let (dn, dt) = (rel_change(base, refined), rel_change(base, halved));
    Outcome {
        pass: base.is_finite() && base > 0.0 && dn < 0.1 && dt < 0.1,
        detail: format!(
            "max ratio {base:.4e} (20 fields, tau 0.1, N_max 8); N_max 10: {refined:.4e} ({:.1}%); tau 0.05: {halved:.4e} ({:.1}%); limit 10%",
            100.0 * dn,
            100.0 * dt
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let suite = random_velocity_suite(
        DEFAULT_SEED,
        20,
        &RandomSpec {
            max_k: 3,
            max_m: 3,
            amplitude: 1.0,
        },
        true,
    );
    let mut leibniz = 0.0f64;
    for i in 0..suite.len() {
        let (u, w) = (&suite[i], &suite[(i + 1) % suite.len()]);
        for n in 1..=4 {
            for a1 in 0..=n {
                leibniz = leibniz.max(leibniz_defect_mode(u, w, [a1, n - a1]).unwrap());
            }
        }
    }
    // grid evaluation of the same identity on a resolved pair
    let (k, p) = (8, 32);
    let ug = VectorGridField::from_mode(&suite[0], k, p).0;
    let wg = VectorGridField::from_mode(&suite[1], k, p).0;
    for alpha in [[1, 0], [0, 1], [1, 1], [2, 1]] {
        leibniz = leibniz.max(leibniz_defect_grid(&ug, &wg, alpha).unwrap());
    }

    let konst = VectorModeField::new(ModeField::constant(2.5), ModeField::constant(-1.0));
    let const_zero = [[1, 0], [0, 1], [2, 3], [4, 0]]
        .iter()
        .all(|&a| s_alpha_mode(&konst, &suite[0], a).unwrap().l2_norm() == 0.0);

    let names = [
        "product",
        "tangential-normal",
        "tangential",
        "tangential-h1",
        "advection-x",
    ];
    let p8 = NormParams::new(3, 0.1, 0.1, 8).unwrap();
    let p10 = p8.with_n_max(10);
    let m8 = product_suite(&suite, &p8).unwrap();
    let m10 = product_suite(&suite, &p10).unwrap();
    let finite = m8.iter().chain(&m10).all(|m| m.ratio.is_finite());
    // reported only: the measured ratio is not flat in tau
    let halved = max_ratio(
        &product_suite(&suite, &NormParams::new(3, 0.05, 0.1, 8).unwrap()).unwrap(),
        "product",
    );
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in names {
        let (a, b) = (max_ratio(&m8, n), max_ratio(&m10, n));
        worst = worst.max(rel_change(a, b));
        parts.push(format!("{n} {a:.3e}"));
    }
    Outcome {
        pass: leibniz < 1e-9 && const_zero && finite && worst < 0.2,
        detail: format!(
            "Leibniz defect {leibniz:.1e} (< 1e-9); S_alpha(const, w) = 0: {const_zero}; max ratios {}; \
             N_max 8 -> 10 change {:.1}% (< 20%); info: tau 0.1 -> 0.05 moves the product ratio by {:+.1}%",
            parts.join(", "),
            100.0 * worst,
            100.0 * (halved - max_ratio(&m8, "product")) / max_ratio(&m8, "product")
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let suite = random_velocity_suite(
        DEFAULT_SEED,
        20,
        &RandomSpec {
            max_k: 3,
            max_m: 3,
            amplitude: 1.0,
        },
        true,
    );
    let at = |n: usize| {
        let p = NormParams::new(3, 0.1, 0.1, n).unwrap();
        suite
            .iter()
            .map(|u| grad_embedding_ratio(&DerivativeTable::from_vector_mode(u, n), &p).unwrap())
            .fold(0.0, f64::max)
    };
    let (a, b) = (at(10), at(12));
    let d = rel_change(a, b);
    Outcome {
        pass: a.is_finite() && b.is_finite() && d < 0.05,
        detail: format!(
            "embedding constant {a:.6e} (N_max 10), {b:.6e} (N_max 12), change {:.3}% (< 5%)",
            100.0 * d
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 7

struct Track {
    div: f64,
    trace: f64,
    balance: f64,
}

impl Track {
    fn new() -> Self {
        Track {
            div: 0.0,
            trace: 0.0,
            balance: 0.0,
        }
    }
}

fn grid_velocity(psi: &ModeField, k: usize, p: usize) -> VectorGridField {
    VectorGridField::from_stream_function(&GridField::from_mode(psi, k, p).0)
}

fn base(flow: BaseFlow, k: usize, p: usize) -> VectorGridField {
    VectorGridField::from_mode(&flow.field(), k, p).0
}

/// Fixed-step RK4 to `t_end`, recording invariant and balance maxima.
fn integrate(
    v0: &VectorGridField,
    ubar: &VectorGridField,
    t_end: f64,
    steps: usize,
    track: &mut Track,
) -> VectorGridField {
    let sched = RadiusSchedule::new(1.0, 1.0, t_end).unwrap();
    let set = SolverSettings::default();
    let mut st = SolverState::new(v0.clone(), ubar, &sched, &set).unwrap();
    for i in 1..=steps {
        let t = if i == steps {
            t_end
        } else {
            i as f64 * t_end / steps as f64
        };
        st = step_rk4(&st, t - st.t, ubar, &sched, &set).unwrap();
        let scale = st.v.l2_norm().max(1.0);
        track.div = track.div.max(st.diag.div / scale);
        track.trace = track.trace.max(st.diag.trace / scale);
        if let Some(b) = st.last_balance {
            track.balance = track.balance.max(b.relative);
        }
    }
    st.v
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut tr = Track::new();

    // zero data, 1000 steps
    let (k, p) = (4, 16);
    let shear = base(BaseFlow::InflowShear { speed: 1.0, shear: 0.3 }, k, p);
    let zero = integrate(&VectorGridField::zeros(k, p), &shear, 1.0, 1000, &mut tr).l2_norm();

    // RK4 self-convergence
    let psi = ModeField::sin_x1(1, Sin(1), 0.1).add(&ModeField::cos_x1(1, Sin(1), 0.05));
    let v0 = grid_velocity(&psi, k, p);
    let sols: Vec<VectorGridField> = [100, 200, 400]
        .iter()
        .map(|&n| integrate(&v0, &shear, 0.2, n, &mut tr))
        .collect();
    let conv = sols[0].sub(&sols[1]).l2_norm() / sols[1].sub(&sols[2]).l2_norm();

    // Galilean frame shift at K = 16, P = 32
    let (k, p) = (16, 32);
    let c = 1.0;
    let psi = ModeField::sin_x1(1, Sin(1), 0.1).add(&ModeField::cos_x1(2, Sin(2), 0.05));
    let v0 = grid_velocity(&psi, k, p);
    let moving = integrate(&v0, &base(BaseFlow::Uniform { speed: c }, k, p), 0.1, 250, &mut tr);
    let still = integrate(&v0, &VectorGridField::zeros(k, p), 0.1, 250, &mut tr);
    let galilean = moving.sub(&shift_x1(&still, c * 0.1)).l2_norm();

    // energy flux balance through permeable walls
    let (k, p) = (8, 24);
    let psi = ModeField::sin_x1(1, Sin(1), 0.02).add(&ModeField::cos_x1(2, Sin(2), 0.01));
    let mut flux = Track::new();
    integrate(
        &grid_velocity(&psi, k, p),
        &base(
            BaseFlow::Transpiration {
                speed: 1.0,
                amplitude: 0.05,
            },
            k,
            p,
        ),
        0.05,
        50,
        &mut flux,
    );
    tr.div = tr.div.max(flux.div);
    tr.trace = tr.trace.max(flux.trace);

    let elapsed = start.elapsed();
    let pass = tr.div <= 1e-9
        && tr.trace <= 1e-9
        && zero <= 1e-10
        && (conv - 16.0).abs() <= 0.2 * 16.0
        && galilean < 1e-6
        && flux.balance <= 1e-6
        && elapsed < Duration::from_secs(180);
    Outcome {
        pass,
        detail: format!(
            "max div {:.1e}, trace {:.1e} (<= 1e-9); zero data {zero:.1e} after 1000 steps (<= 1e-10); \
             self-convergence {conv:.3} (16 +- 20%); Galilean {galilean:.2e} (< 1e-6); energy balance {:.1e} (<= 1e-6); \
             {:.1} s (< 180 s)",
            tr.div,
            tr.trace,
            flux.balance,
            secs(elapsed)
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 8

fn apriori_bound(k: usize, p: usize) -> (f64, usize, bool) {
    let norms = NormParams::new(3, 0.2, 0.5, 6).unwrap();
    let schedule = RadiusSchedule::new(0.2, 2.0, 0.02).unwrap();
    let psi = ModeField::sin_x1(1, Sin(1), 0.02).add(&ModeField::cos_x1(2, Sin(2), 0.01));
    let spec = RunSpec {
        v0: grid_velocity(&psi, k, p),
        ubar: base(BaseFlow::Uniform { speed: 1.0 }, k, p),
        schedule,
        dt: 1e-4,
        norms,
        settings: SolverSettings::default(),
        ceiling: None,
        sample_every: 1,
        checkpoint_every: None,
        checkpoint_dir: None,
    };
    let out = run(&spec).unwrap();
    let samples: Vec<NormSample> = out
        .series
        .iter()
        .map(|r| NormSample {
            t: r.t,
            tau: r.tau,
            v: r.norms(),
        })
        .collect();
    let ubar = DerivativeTable::from_vector_grid_unchecked(&spec.ubar, norms.n_max);
    let ms = apriori_check(&samples, &schedule, &ubar, &norms).unwrap();
    let finite = ms.iter().all(|m| m.ratio.is_finite() && !m.vacuous);
    (ms.iter().map(|m| m.ratio).fold(0.0, f64::max), ms.len(), finite)
}

fn criterion_8() -> Outcome {
    let (c1, n1, f1) = apriori_bound(6, 24);
    let (c2, n2, f2) = apriori_bound(12, 48);
    let d = rel_change(c1, c2);
    Outcome {
        pass: f1 && f2 && c1 > 0.0 && d < 0.25,
        detail: format!(
            "lhs/rhs <= {c1:.6e} over {n1} interior samples at K6/P24, {c2:.6e} over {n2} at K12/P48; change {:.2e}% (< 25%)",
            100.0 * d
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let (k, p) = (6, 24);
    let tau0 = 0.2;
    let norms = NormParams::new(3, tau0, 0.5, 6).unwrap();
    let suite = random_velocity_suite(
        DEFAULT_SEED,
        3,
        &RandomSpec {
            max_k: 2,
            max_m: 2,
            amplitude: 0.02,
        },
        true,
    );
    let c0 = max_ratio(&product_suite(&suite, &norms).unwrap(), "product");
    let ubar = base(BaseFlow::Uniform { speed: 1.0 }, k, p);
    let settings = SolverSettings::default();
    let mut ok = c0.is_finite() && c0 > 0.0;
    let mut worst_rho = 0.0f64;
    let mut worst_diff = 0.0f64;
    let mut parts = Vec::new();
    for u in &suite {
        let v0 = VectorGridField::from_mode(u, k, p).0;
        let a = uniform_bound_constant(&v0, &ubar, &norms, tau0);
        let s1 = contraction_schedule(c0, a, tau0).unwrap();
        let s2 = RadiusSchedule::new(tau0, 2.0 * s1.m, tau0.min(1.0) / (2.0 * s1.m)).unwrap();
        let mut rhos = Vec::new();
        for s in [s1, s2] {
            let out = picard_run(&v0, &ubar, &s, 20, &norms, &settings, &PicardSettings::default()).unwrap();
            let ratios = out.trace.ratios();
            ok &= out.converged && !ratios.is_empty() && ratios.iter().all(|&r| r < 1.0) && out.bound.holds();
            let mut tr = Track::new();
            let rk = integrate(&v0, &ubar, s.t0, 16, &mut tr);
            let diff = out.at_t0().sub(&rk).l2_norm();
            worst_diff = worst_diff.max(diff);
            worst_rho = worst_rho.max(out.trace.rho());
            rhos.push(out.trace.rho());
        }
        ok &= rhos[1] < rhos[0];
        parts.push(format!("M {:.1}: rho {:.2e} -> {:.2e}", s1.m, rhos[0], rhos[1]));
    }
    ok &= worst_diff < 1e-6;
    Outcome {
        pass: ok,
        detail: format!(
            "C0 = {c0:.3e}, M = 12 C0 A; {}; max rho {worst_rho:.2e} (< 1); |picard - rk4| {worst_diff:.1e} (< 1e-6); uniform bound holds",
            parts.join(", ")
        ),
        known: false,
    }
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let refused = matches!(
        parse_config("[schedule]\ntau0 = 0.2\nm = 2.0\n[time]\nt0 = 0.2\n"),
        Err(channel_euler::Error::Config(m)) if m.contains("radius constraint")
    );
    let direct = RadiusSchedule::new(0.2, 2.0, 0.2).is_err();
    let (k, p) = (4, 16);
    let psi = ModeField::sin_x1(1, Sin(1), 0.02);
    let spec = RunSpec {
        v0: grid_velocity(&psi, k, p),
        ubar: base(BaseFlow::Uniform { speed: 1.0 }, k, p),
        schedule: RadiusSchedule::new(0.2, 2.0, 0.1).unwrap(),
        dt: 1e-3,
        norms: NormParams::new(3, 0.2, 0.5, 6).unwrap(),
        settings: SolverSettings::default(),
        ceiling: None,
        sample_every: 10,
        checkpoint_every: None,
        checkpoint_dir: None,
    };
    let out = run(&spec).unwrap();
    let fs = &out.final_state;
    let positive_before = out.series.iter().filter(|r| r.t < 0.1).all(|r| r.tau > 0.0);
    let halted = fs.t == 0.1 && fs.tau == 0.0 && out.series.last().map(|r| r.tau) == Some(0.0);
    Outcome {
        pass: refused && direct && halted && positive_before,
        detail: format!(
            "T0 = 2 tau0/M refused naming the radius constraint: {refused}; run halts at t = {}, tau = {} (tau0 = 0.2, M = 2)",
            fs.t, fs.tau
        ),
        known: false,
    }
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "combinatorial certificates", criterion_1),
        (2, "a_l / a_h boundedness", criterion_2),
        (3, "pressure solver", criterion_3),
        (4, "pressure estimate", criterion_4),
        (5, "product estimate", criterion_5),
        (6, "embedding", criterion_6),
        (7, "solver invariants", criterion_7),
        (8, "a priori estimate", criterion_8),
        (9, "Picard contraction", criterion_9),
        (10, "schedule semantics", criterion_10),
    ];
    let mut unexpected = 0;
    println!();
    for (id, title, check) in criteria {
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass {
            "PASS"
        } else if o.known {
            "FAIL (known counterexample, pinned)"
        } else {
            unexpected += 1;
            "FAIL"
        };
        println!(
            "criterion {id:>2} {verdict}: {title}: {} [{:.1} s]",
            o.detail,
            secs(t.elapsed())
        );
    }
    println!();
    if unexpected > 0 {
        eprintln!("{unexpected} criterion(s) failed");
        std::process::exit(1);
    }
}
