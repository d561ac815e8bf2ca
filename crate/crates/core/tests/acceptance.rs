//! Acceptance report. Prints one `PASS` or `FAIL` line per criterion with
//! indented details underneath. Failing criteria do not fail the test
//! binary; a panic or a run error does.
//!
//! Runs real slab sweeps, about 1.5 h on one core:
//! `cargo test -p ghostfem --release --test acceptance`.

use std::time::Instant;

use ghostfem::config::with_value;
use ghostfem::discretization::element_matrices;
use ghostfem::mms::{mms_mesh, observed_rate, solve_level};
use ghostfem::solver::LuSolver;
use ghostfem::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }
}

fn report(name: &str, secs: f64, out: Outcome) {
    println!("{} {name} ({secs:.0} s)", if out.pass { "PASS" } else { "FAIL" });
    for d in out.details {
        println!("    {d}");
    }
}

/// Every energy record seen during the suite, for the split identity.
#[derive(Default)]
struct Ledger {
    records: usize,
    worst_split: f64,
    blow_ups: Vec<(String, RunConfig, RunReport)>,
}

impl Ledger {
    fn run(&mut self, label: &str, cfg: &RunConfig) -> RunReport {
        let rep = evolve(cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
        for r in &rep.energies {
            let parts = r.h_phi.abs() + r.h_chi.abs() + r.h_int.abs();
            if parts > 0.0 {
                self.worst_split = self.worst_split.max((r.h - (r.h_phi + r.h_chi + r.h_int)).abs() / parts);
            }
        }
        self.records += rep.energies.len();
        if rep.terminated_by == Termination::BlowUp {
            self.blow_ups.push((label.to_string(), cfg.clone(), rep.clone()));
        }
        rep
    }
}

fn config(ic: InitialDataSpec, max_slabs: usize) -> RunConfig {
    RunConfig { ic, max_slabs, output_dir: None, ..RunConfig::default() }
}

fn set(cfg: &RunConfig, pairs: &[(&str, &str)]) -> RunConfig {
    pairs.iter().fold(cfg.clone(), |c, (k, v)| with_value(&c, k, v).unwrap_or_else(|e| panic!("{k}={v}: {e}")))
}

fn lifetime_label(rep: &RunReport) -> String {
    match rep.terminated_by {
        Termination::MaxSlabs => format!(">={}", rep.t_long_lived),
        Termination::BlowUp => rep.t_long_lived.to_string(),
    }
}

/// Sweeps `axis` over `values`, returning lifetimes in input order.
fn lifetimes(ledger: &mut Ledger, name: &str, base: &RunConfig, axis: &str, values: &[&str]) -> Vec<usize> {
    values
        .iter()
        .map(|v| {
            let cfg = set(base, &[(axis, v)]);
            ledger.run(&format!("{name} {axis}={v}"), &cfg).t_long_lived
        })
        .collect()
}

fn mms_1p1() -> Outcome {
    let mut out = Outcome::new();
    let reference = [(100, 7.64e-4, 9.08e-4), (200, 1.90e-4, 2.26e-4), (400, 4.76e-5, 5.65e-5)];
    let opts = NewtonOptions::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    for (n, ref_phi, ref_chi) in reference {
        let mesh = mms_mesh(Dims::D1, n);
        let (_, ep, ec) = solve_level(&mesh, &opts).unwrap_or_else(|e| panic!("mms {n}: {e}"));
        let rel_phi = (ep - ref_phi).abs() / ref_phi;
        let rel_chi = (ec - ref_chi).abs() / ref_chi;
        out.check(
            rel_phi <= 0.2 && rel_chi <= 0.2,
            format!("{}: phi {ep:.3e} (ref {ref_phi:.2e}), chi {ec:.3e} (ref {ref_chi:.2e})", mesh.label()),
        );
        if let Some((hp, pp, pc)) = prev {
            let (rp, rc) = (observed_rate(pp, ep, hp, mesh.h_x()), observed_rate(pc, ec, hp, mesh.h_x()));
            out.check(
                (1.95..=2.05).contains(&rp) && (1.95..=2.05).contains(&rc),
                format!("rate to {}: phi {rp:.3}, chi {rc:.3}", mesh.label()),
            );
        }
        prev = Some((mesh.h_x(), ep, ec));
    }
    out
}

fn mms_2p1() -> Outcome {
    let mut out = Outcome::new();
    let opts = NewtonOptions::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    for n in [10, 20, 40] {
        let mesh = mms_mesh(Dims::D2, n);
        let problem = SlabProblem::new(&mesh, &mms::mms_model(), Mode::Mms, 0.0).unwrap();
        if let Err(e) = LuSolver::new(&problem.pattern).check_memory() {
            out.check(false, format!("{}: not solvable here: {e}", mesh.label()));
            continue;
        }
        drop(problem);
        let (_, ep, ec) = solve_level(&mesh, &opts).unwrap_or_else(|e| panic!("mms {n}: {e}"));
        out.note(format!("{}: phi {ep:.3e}, chi {ec:.3e}", mesh.label()));
        if let Some((hp, pp, pc)) = prev {
            let (rp, rc) = (observed_rate(pp, ep, hp, mesh.h_x()), observed_rate(pc, ec, hp, mesh.h_x()));
            out.check(
                (1.7..=2.4).contains(&rp) && (1.7..=2.4).contains(&rc),
                format!("rate to {}: phi {rp:.3}, chi {rc:.3}", mesh.label()),
            );
        }
        prev = Some((mesh.h_x(), ep, ec));
    }
    out
}

/// Reference coordinates of local node `k`: counter-clockwise in (x, t),
/// then the same four again at the far y face.
fn node(k: usize) -> [f64; 3] {
    let m = k % 4;
    [if m == 1 || m == 2 { 1.0 } else { 0.0 }, if m >= 2 { 1.0 } else { 0.0 }, if k >= 4 { 1.0 } else { 0.0 }]
}

fn hat(a: f64, s: f64) -> (f64, f64) {
    if a == 0.0 {
        (1.0 - s, -1.0)
    } else {
        (s, 1.0)
    }
}

/// Three-point Gauss-Legendre integration of the defining integrals.
fn element_oracle(dims: Dims, h: [f64; 3]) -> [Vec<Vec<f64>>; 4] {
    let n = dims.nodes_per_element();
    let g = [(0.5 - 0.5 * 0.6f64.sqrt(), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.5 * 0.6f64.sqrt(), 5.0 / 18.0)];
    let zs: Vec<(f64, f64)> = if dims == Dims::D2 { g.to_vec() } else { vec![(0.0, 1.0)] };
    let vol = h[0] * h[1] * if dims == Dims::D2 { h[2] } else { 1.0 };
    let mut out: [Vec<Vec<f64>>; 4] = std::array::from_fn(|_| vec![vec![0.0; n]; n]);
    for &(x, wx) in &g {
        for &(t, wt) in &g {
            for &(z, wz) in &zs {
                let w = wx * wt * wz * vol;
                let eval = |k: usize| {
                    let c = node(k);
                    let (fx, dx) = hat(c[0], x);
                    let (ft, dt) = hat(c[1], t);
                    let (fz, dz) = if dims == Dims::D2 { hat(c[2], z) } else { (1.0, 0.0) };
                    (fx * ft * fz, dx * ft * fz / h[0], fx * dt * fz / h[1], fx * ft * dz / h[2])
                };
                for i in 0..n {
                    let (vi, xi, _, yi) = eval(i);
                    for j in 0..n {
                        let (vj, xj, tj, yj) = eval(j);
                        out[0][i][j] += w * vi * tj;
                        out[1][i][j] += w * xi * xj;
                        out[2][i][j] += w * yi * yj;
                        out[3][i][j] += w * vi * vj;
                    }
                }
            }
        }
    }
    out
}

fn oracles() -> Outcome {
    let mut out = Outcome::new();
    let mut worst: f64 = 0.0;
    for dims in [Dims::D1, Dims::D2] {
        for h in [[1.0, 1.0, 1.0], [0.01, 0.01, 0.01], [0.02, 0.005, 0.03], [0.37, 1.9, 0.8]] {
            let em = element_matrices(dims, h[0], h[1], h[2]);
            let oracle = element_oracle(dims, h);
            let sy = em.space_y.unwrap_or(ghostfem::discretization::LocalMatrix::zeros(em.mass.n));
            for (m, o) in [em.time, em.space_x, sy, em.mass].iter().zip(&oracle) {
                let scale = o.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
                if scale == 0.0 {
                    continue;
                }
                for i in 0..m.n {
                    for j in 0..m.n {
                        worst = worst.max((m.get(i, j) - o[i][j]).abs() / scale);
                    }
                }
            }
        }
    }
    out.check(worst <= 1e-13, format!("element matrices vs quadrature: worst relative difference {worst:.2e}"));

    let potentials = [
        Potential::None,
        Potential::V22 { lambda22: 1.0 },
        Potential::LiftedPhi6 { m: 1.0, lambda: 1.0, g: 1.0 },
        Potential::Mms { lambda: 1.0 },
    ];
    let meshes = [MeshSpec::new_1d(8, 5, 1.0, 0.5), MeshSpec::new_2d(3, 4, 3, 1.0, 0.5)];
    let mut worst_fd: f64 = 0.0;
    let mut cases = 0;
    for (mi, mesh) in meshes.iter().enumerate() {
        for (pi, potential) in potentials.iter().enumerate() {
            for gamma in [KineticSign::Normal, KineticSign::Ghost] {
                let model = ModelParams { m_phi: 1.0, m_chi: 0.7, gamma, potential: *potential };
                let mode = if potential.is_mms() { Mode::Mms } else { Mode::Physical };
                let mut rng = ChaCha8Rng::seed_from_u64((mi * 100 + pi * 10) as u64 + (gamma == KineticSign::Ghost) as u64);
                let mut u = SlabState::zeros(mesh);
                for (k, v) in u.values.iter_mut().enumerate() {
                    *v = rng.random::<f64>() * 2.4 - 1.2;
                    // keep the manufactured potential away from its singular locus
                    if potential.is_mms() && k % 2 == 0 {
                        *v = 1.0 + 0.3 * (*v / 1.2);
                    }
                }
                let ic = u.level(mesh, 0);
                let problem = SlabProblem::new(mesh, &model, mode, 0.0).unwrap();
                let jac = problem.jacobian(&u.values, &ic).unwrap();
                let eps = 1e-6;
                for c in 0..problem.ndof() {
                    let mut up = u.values.clone();
                    up[c] += eps;
                    let rp = problem.residual(&up, &ic).unwrap();
                    up[c] -= 2.0 * eps;
                    let rm = problem.residual(&up, &ic).unwrap();
                    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
                    let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
                    for (r, f) in fd.iter().enumerate() {
                        worst_fd = worst_fd.max((jac.get(&problem.pattern, r, c) - f).abs() / scale);
                    }
                }
                cases += 1;
            }
        }
    }
    out.check(worst_fd <= 1e-5, format!("jacobian vs central differences, {cases} cases: worst relative error {worst_fd:.2e}"));
    out
}

fn energy(ledger: &mut Ledger) -> Outcome {
    let mut out = Outcome::new();
    let mut cfg = config(InitialDataSpec::default(), 10);
    cfg.model = ModelParams { gamma: KineticSign::Normal, potential: Potential::None, ..ModelParams::default() };
    let rep = ledger.run("energy", &cfg);
    let h0 = rep.energies[0].h;
    let drift = rep.energies.iter().map(|r| (r.h - h0).abs() / h0.abs()).fold(0.0, f64::max);
    out.check(
        rep.t_long_lived == 10 && drift < 1e-3,
        format!("normal free plane wave, 10 slabs: max |H(t)-H(0)|/|H(0)| = {drift:.3e}"),
    );
    out.note(format!("H(0) = {h0:.6}, H(end) = {:.6}", rep.energies.last().unwrap().h));
    out
}

fn non_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn non_decreasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn show(values: &[&str], life: &[usize], cap: usize) -> String {
    values
        .iter()
        .zip(life)
        .map(|(v, l)| if *l == cap { format!("{v}:>={l}") } else { format!("{v}:{l}") })
        .collect::<Vec<_>>()
        .join(" ")
}

fn stability_orderings(ledger: &mut Ledger) -> Outcome {
    let mut out = Outcome::new();

    let cap = 300;
    let t = Instant::now();
    let base = config(InitialDataSpec::default(), cap);
    let amps = ["0.2", "0.4", "0.6", "0.8", "1.0"];
    let life = lifetimes(ledger, "plane", &base, "ic.A", &amps);
    out.check(non_increasing(&life), format!("plane wave C=1, over A: {}", show(&amps, &life, cap)));
    out.check(t.elapsed().as_secs() <= 3600, format!("  sweep time {:.0} s", t.elapsed().as_secs_f64()));

    let cap = 200;
    let t = Instant::now();
    let base = config(InitialDataSpec::default(), cap);
    let cs = ["0.5", "1.0", "2.0"];
    let life = lifetimes(ledger, "plane", &base, "ic.C", &cs);
    out.check(non_decreasing(&life), format!("plane wave A=0.6, over C: {}", show(&cs, &life, cap)));
    out.check(t.elapsed().as_secs() <= 3600, format!("  sweep time {:.0} s", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let noise = InitialDataSpec::ColoredNoise {
        a: 1.0,
        n1: 1,
        n2: 64,
        n_s: 0.0,
        rng_seed: 7,
        delta_phase: 0.0,
        s_policy: SignPolicy::Counter,
    };
    let base = config(noise, cap);
    let tilts = ["-2", "-1", "0", "1"];
    let life = lifetimes(ledger, "noise", &base, "ic.n_s", &tilts);
    out.check(non_decreasing(&life), format!("colored noise A=1, n2=64, over n_s: {}", show(&tilts, &life, cap)));
    out.check(t.elapsed().as_secs() <= 3600, format!("  sweep time {:.0} s", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let amps = ["1.0", "1.5", "2.0", "2.5"];
    for c in [2.0, 1.0, 0.5] {
        let packet = InitialDataSpec::GaussianPacket { a: 1.0, c, x_phi: None, x_chi: None, c_phi: 1.0, c_chi: -1.0 };
        let base = config(packet, cap);
        let life = lifetimes(ledger, &format!("gauss C={c}"), &base, "ic.A", &amps);
        out.check(non_increasing(&life), format!("gaussian packet C={c}, over A: {}", show(&amps, &life, cap)));
    }
    out.check(t.elapsed().as_secs() <= 3600, format!("  sweep time {:.0} s", t.elapsed().as_secs_f64()));
    out
}

fn factorial(ledger: &mut Ledger) -> Outcome {
    let mut out = Outcome::new();
    let cap = 200;
    let seed = InitialDataSpec::OscillonSeed { a: 1.0, width_sigma: 0.05, r: 1.0, delta_phi: 0.0, x0: None, k0: 0.0 };
    let base = config(seed, cap);
    let mut run = |label: &str, pairs: &[(&str, &str)]| {
        let rep = ledger.run(label, &set(&base, pairs));
        (rep.terminated_by, rep.t_long_lived, lifetime_label(&rep))
    };
    let normal_free = run("normal lambda=0", &[("model.gamma", "1"), ("model.lambda22", "0")]);
    let ghost_free = run("ghost lambda=0", &[("model.lambda22", "0")]);
    let normal = run("normal lambda=1", &[("model.gamma", "1")]);
    let ghost = run("ghost lambda=1", &[]);
    let massless = run("massless ghost lambda=1", &[("model.m_phi", "0"), ("model.m_chi", "0")]);
    let blew = |r: &(Termination, usize, String)| r.0 == Termination::BlowUp;
    out.check(!blew(&normal_free), format!("normal, lambda=0 reaches the cap: {}", normal_free.2));
    out.check(!blew(&ghost_free), format!("ghost, lambda=0 reaches the cap: {}", ghost_free.2));
    out.check(blew(&normal), format!("normal, lambda=1 blows up: {}", normal.2));
    out.check(
        blew(&ghost) && (!blew(&normal) || ghost.1 < normal.1),
        format!("ghost, lambda=1 blows up before its normal twin: {} vs {}", ghost.2, normal.2),
    );
    out.check(
        blew(&massless) && (!blew(&ghost) || massless.1 < ghost.1),
        format!("massless ghost, lambda=1 blows up before the massive one: {} vs {}", massless.2, ghost.2),
    );
    out
}

fn phi6_scan(ledger: &mut Ledger) -> Outcome {
    let mut out = Outcome::new();
    let cap = 200;
    let seed = InitialDataSpec::OscillonSeed { a: 0.5, width_sigma: 0.05, r: 1.0, delta_phi: 0.0, x0: None, k0: 0.0 };
    let mut base = config(seed, cap);
    base.model.potential = Potential::LiftedPhi6 { m: config::DEFAULT_PHI6_MASS, lambda: 1.0, g: 1.0 };
    let amps = ["0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1.0", "1.1", "1.2"];
    let life = lifetimes(ledger, "phi6", &base, "ic.A", &amps);
    out.note(format!("lifetimes: {}", show(&amps, &life, cap)));
    let a: Vec<f64> = amps.iter().map(|s| s.parse().unwrap()).collect();
    let peak = (1..a.len() - 1).find(|&i| {
        (0.5..=0.9).contains(&a[i])
            && life[i] >= life[i - 1]
            && life[i] >= life[i + 1]
            && (life[i] > life[i - 1] || life[i] > life[i + 1])
    });
    out.check(
        peak.is_some(),
        match peak {
            Some(i) => format!("local maximum at A={}", amps[i]),
            None => "no local maximum with A in [0.5, 0.9]".into(),
        },
    );
    let (l12, l05) = (life[a.len() - 1], life[3]);
    out.check(l12 < l05, format!("lifetime(1.2)={l12} < lifetime(0.5)={l05}"));
    out
}

fn blow_up_semantics(ledger: &mut Ledger) -> Outcome {
    let mut out = Outcome::new();
    if ledger.blow_ups.is_empty() {
        out.check(false, "no run in the suite blew up".into());
        return out;
    }
    let bad: Vec<&str> = ledger
        .blow_ups
        .iter()
        .filter(|(_, _, r)| r.slab_reports.last().map_or(true, |s| s.converged))
        .map(|(l, _, _)| l.as_str())
        .collect();
    out.check(bad.is_empty(), format!("{} blow-ups end in a non-converged slab; offending: {bad:?}", ledger.blow_ups.len()));
    let (label, cfg, first) = ledger.blow_ups.iter().min_by_key(|(_, _, r)| r.t_long_lived).cloned().unwrap();
    let again = evolve(&cfg).unwrap_or_else(|e| panic!("rerun {label}: {e}"));
    out.check(
        again.t_long_lived == first.t_long_lived && again.terminated_by == first.terminated_by,
        format!("rerun of '{label}': {} then {}", first.t_long_lived, again.t_long_lived),
    );
    out
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn main() {
    let mut ledger = Ledger::default();
    let (out, secs) = timed(mms_1p1);
    report("MMS 1+1 convergence", secs, out);
    let (out, secs) = timed(mms_2p1);
    report("MMS 2+1 convergence", secs, out);
    let (out, secs) = timed(oracles);
    report("oracle suites", secs, out);
    let (out, secs) = timed(|| stability_orderings(&mut ledger));
    report("stability orderings", secs, out);
    let (out, secs) = timed(|| factorial(&mut ledger));
    report("ghost/nonlinearity factorial", secs, out);
    let (out, secs) = timed(|| phi6_scan(&mut ledger));
    report("phi6 amplitude scan", secs, out);
    let (out, secs) = timed(|| blow_up_semantics(&mut ledger));
    report("blow-up semantics", secs, out);
    // the split identity covers every record produced above
    let (mut out, secs) = timed(|| energy(&mut ledger));
    out.check(
        ledger.worst_split <= 1e-12,
        format!("split identity over {} records: worst relative gap {:.2e}", ledger.records, ledger.worst_split),
    );
    report("energy conservation", secs, out);
}
