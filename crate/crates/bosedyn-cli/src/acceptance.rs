//! Structural self-check suite: ten criteria covering the kinematic
//! identities, the string-action lemmas, the partial-trace contract, the
//! hierarchy consistency, the mean-field and GPE limits, the dissipative
//! algebra, and harness determinism. Every tolerance is pinned here; the
//! suite is what `bosedyn selftest` executes and what the acceptance
//! integration test asserts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bosedyn_core::dissipator::{
    b_trace_identity_deviation, dissipator_apply, dissipator_hc_form, gamma_s_split, gamma_tensor,
    lamb_shift, lindblad_rhs, propagate_dissipative_mean_field, QuadratureRule, QuadratureSpec,
    Rank4,
};
use bosedyn_core::exact::{propagate_von_neumann, TimeGrid};
use bosedyn_core::fock::{
    annihilation_string_tuple_formula, apply_annihilation_string, apply_creation_string,
    factorial_big, perm_delta, perm_delta_permutation_sum, sector, tuple_state, tuple_to_fock,
    ModeTuple, SectorVector,
};
use bosedyn_core::hierarchy::{
    bbgky_rhs, gpe_energy, hubbard_chain, mean_field_potential, propagate_gpe,
    propagate_mean_field, Boundary, LatticeConfig, MeanFieldState,
};
use bosedyn_core::linalg::{self, max_abs, CMatrix, CVector, C64, I};
use bosedyn_core::sample;
use bosedyn_core::second_quant::{
    embed_one_body, embed_two_body, m_particle_matrix_element, SectorOperator, TwoBodyOperator,
};
use bosedyn_core::subsystem::{
    naive_tensor_trace_check, partial_trace, product_state_density, product_state_vector,
    DensityMatrix,
};
use bosedyn_core::Hamiltonian;
use num_traits::ToPrimitive;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub number: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} [{}] {}",
            self.number,
            if self.passed { "PASS" } else { "FAIL" },
            self.name
        )
    }
}

struct Checker {
    passed: bool,
    details: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Checker {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, label: &str, detail: String) {
        if ok {
            self.details.push(format!("ok   {label}: {detail}"));
        } else {
            self.passed = false;
            self.details.push(format!("FAIL {label}: {detail}"));
        }
    }

    fn bound(&mut self, label: &str, value: f64, limit: f64) {
        self.check(
            value < limit,
            label,
            format!("{value:.3e} (limit {limit:.1e})"),
        );
    }

    fn into_result(self, number: usize, name: &'static str) -> CriterionResult {
        CriterionResult {
            number,
            name,
            passed: self.passed,
            details: self.details,
        }
    }
}

fn all_tuples(d: usize, k: usize) -> Vec<ModeTuple> {
    let mut out = Vec::new();
    let total = d.pow(k as u32);
    for mut code in 0..total {
        let mut t = Vec::with_capacity(k);
        for _ in 0..k {
            t.push(code % d);
            code /= d;
        }
        out.push(ModeTuple::new(t));
    }
    out
}

/// Criterion 1: permutation-delta formulas agree exactly, and the summed
/// creation/annihilation strings reproduce N!/(N-M)! times the identity.
pub fn criterion_1() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let mut pairs = 0usize;
    let mut exact_equal = true;
    for k in 0..=4usize {
        let tuples = all_tuples(d, k);
        for i in &tuples {
            for j in &tuples {
                let fast = perm_delta(i, j).expect("equal lengths");
                let slow = perm_delta_permutation_sum(i, j).expect("equal lengths");
                exact_equal &= fast == slow;
                pairs += 1;
            }
        }
    }
    c.check(
        exact_equal,
        "perm_delta multiset formula == permutation-sum oracle",
        format!("{pairs} tuple pairs, d=3, K<=4, exact rational equality"),
    );
    let n = 3;
    let basis = sector(d, n).expect("sector fits");
    for m in 1..=3usize {
        let mut acc = CMatrix::zeros(basis.dim(), basis.dim());
        for t in all_tuples(d, m) {
            for (col, f) in basis.states().iter().enumerate() {
                let v = SectorVector::unit(basis.clone(), f).expect("state in basis");
                let down = apply_annihilation_string(&t, &v).expect("m <= n");
                let up = apply_creation_string(&t, &down).expect("within cap");
                for row in 0..basis.dim() {
                    acc[(row, col)] += up.amplitudes()[row];
                }
            }
        }
        let scale = (factorial_big(n) / factorial_big(n - m)).to_f64().unwrap();
        let dev =
            max_abs(&(acc - CMatrix::identity(basis.dim(), basis.dim()) * C64::new(scale, 0.0)));
        c.bound(&format!("number-string identity (3,3,{m})"), dev, 1e-12);
    }
    c.into_result(1, "kinematic identities")
}

/// Criterion 2: string-action lemma and the binomial-inverse matrix
/// elements match the elementary ladder oracle on every basis state.
pub fn criterion_2() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let n = 3;
    let basis = sector(d, n).expect("sector fits");
    // string actions, all M <= 3, every basis state
    for m in 1..=n {
        let mut worst: f64 = 0.0;
        for i in all_tuples(d, m) {
            for f in basis.states() {
                let j = f.to_tuple();
                let formula = annihilation_string_tuple_formula(&i, &j, d).expect("valid");
                let fold = apply_annihilation_string(&i, &tuple_state(&j, &basis).unwrap())
                    .expect("m <= n");
                worst = worst.max((formula.amplitudes() - fold.amplitudes()).norm());
            }
        }
        c.bound(&format!("string-action lemma M={m}"), worst, 1e-12);
    }
    // binomial-inverse matrix elements vs ladder embeddings
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let h1 = sample::one_body(&mut rng, d);
    let v = sample::two_body(&mut rng, d);
    let one_emb = embed_one_body(&h1, &basis).expect("embed");
    let two_emb = embed_two_body(&v, &basis).expect("embed");
    let h1c = h1.coeffs().clone();
    let t1 = move |si: &[usize], sj: &[usize]| h1c[(si[0], sj[0])];
    let v2 = v.clone();
    let t2 = move |si: &[usize], sj: &[usize]| v2.element(si[0], si[1], sj[0], sj[1]);
    let full =
        SectorOperator::new(basis.clone(), one_emb.matrix() + two_emb.matrix()).expect("dims");
    let basis_ref = basis.clone();
    let t3 = move |si: &[usize], sj: &[usize]| {
        let (fi, ki) = tuple_to_fock(&ModeTuple::new(si.to_vec()), d).unwrap();
        let (fj, kj) = tuple_to_fock(&ModeTuple::new(sj.to_vec()), d).unwrap();
        full.matrix()[(
            basis_ref.index_of(&fi).unwrap(),
            basis_ref.index_of(&fj).unwrap(),
        )] * (ki * kj)
    };
    let full2 = one_emb.matrix() + two_emb.matrix();
    let mut worst = [0.0f64; 3];
    for (r, fi) in basis.states().iter().enumerate() {
        for (cc, fj) in basis.states().iter().enumerate() {
            let ti = fi.to_tuple();
            let tj = fj.to_tuple();
            let (_, ki) = tuple_to_fock(&ti, d).unwrap();
            let (_, kj) = tuple_to_fock(&tj, d).unwrap();
            let kk = C64::new(ki * kj, 0.0);
            let got1 = m_particle_matrix_element(1, &t1, &ti, &tj).unwrap();
            worst[0] = worst[0].max((got1 - one_emb.matrix()[(r, cc)] * kk).norm());
            let got2 = m_particle_matrix_element(2, &t2, &ti, &tj).unwrap();
            worst[1] = worst[1].max((got2 - two_emb.matrix()[(r, cc)] * kk).norm());
            let got3 = m_particle_matrix_element(3, &t3, &ti, &tj).unwrap();
            worst[2] = worst[2].max((got3 - full2[(r, cc)] * kk).norm());
        }
    }
    for (m, w) in worst.iter().enumerate() {
        c.bound(
            &format!("binomial-inverse matrix elements M={}", m + 1),
            *w,
            1e-12,
        );
    }
    c.into_result(2, "string-action lemma and M-particle matrix elements")
}

/// Criterion 3: the partial-trace contract on 100 random three-particle
/// states.
pub fn criterion_3() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let n = 3;
    let basis = sector(d, n).expect("fits");
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut worst_trace: f64 = 0.0;
    let mut worst_eig: f64 = f64::INFINITY;
    let mut worst_nest: f64 = 0.0;
    let mut worst_exp: f64 = 0.0;
    for _ in 0..100 {
        let rho = sample::density(&mut rng, &basis);
        for m in 1..=2usize {
            let reduced = partial_trace(&rho, m).expect("valid");
            worst_trace = worst_trace.max((reduced.trace() - C64::new(1.0, 0.0)).norm());
            worst_eig = worst_eig.min(reduced.min_eigenvalue());
        }
        let nested = partial_trace(&partial_trace(&rho, 2).unwrap(), 1).unwrap();
        let direct = partial_trace(&rho, 1).unwrap();
        worst_nest = worst_nest.max(max_abs(&(nested.matrix() - direct.matrix())));
        for m in 1..=2usize {
            let bm = sector(d, m).unwrap();
            // two independent routes: the observable evaluated in the full
            // N-particle sector, and the binomial-weighted reduced trace
            let (a_reduced, a_full) = if m == 1 {
                let h = sample::one_body(&mut rng, d);
                (
                    embed_one_body(&h, &bm).unwrap(),
                    embed_one_body(&h, &basis).unwrap(),
                )
            } else {
                let v = sample::two_body(&mut rng, d);
                (
                    embed_two_body(&v, &bm).unwrap(),
                    embed_two_body(&v, &basis).unwrap(),
                )
            };
            let sector_route = linalg::trace(&(rho.matrix() * a_full.matrix()));
            let reduced_route =
                bosedyn_core::second_quant::expectation_m_particle(&rho, &a_reduced).unwrap();
            worst_exp = worst_exp.max((sector_route - reduced_route).norm());
        }
    }
    c.bound("unit trace of reductions", worst_trace, 1e-10);
    c.check(
        worst_eig > -1e-10,
        "positive semidefiniteness",
        format!("min eigenvalue {worst_eig:.3e} (limit -1e-10)"),
    );
    c.bound("nesting Tr2 == Tr1∘Tr1", worst_nest, 1e-11);
    c.bound("expectation binomial factor", worst_exp, 1e-10);
    c.into_result(3, "partial-trace contract on random states")
}

/// Criterion 4: tracing ρ⊗ρ through the two-particle calculus returns
/// ½(ρ + ρ²), with pure states as exact fixed points.
pub fn criterion_4() -> CriterionResult {
    let mut c = Checker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in 2..=4usize {
        let b1 = sector(d, 1).unwrap();
        let reps = if d == 2 { 34 } else { 33 };
        for _ in 0..reps {
            let rho = sample::density(&mut rng, &b1);
            let out = naive_tensor_trace_check(&rho).expect("valid");
            let expect = (rho.matrix() + rho.matrix() * rho.matrix()) * C64::new(0.5, 0.0);
            worst = worst.max(max_abs(&(out.matrix() - expect)));
            cases += 1;
        }
    }
    c.bound(
        &format!("identity over {cases} random mixed states, d<=4"),
        worst,
        1e-12,
    );
    let mut worst_pure: f64 = 0.0;
    for d in 2..=4usize {
        let b1 = sector(d, 1).unwrap();
        let v = SectorVector::new(b1.clone(), sample::pure_vector(&mut rng, d)).unwrap();
        let rho = DensityMatrix::pure(&v).unwrap();
        let out = naive_tensor_trace_check(&rho).unwrap();
        worst_pure = worst_pure.max(max_abs(&(out.matrix() - rho.matrix())));
    }
    c.bound("pure states are fixed points", worst_pure, 1e-12);
    c.into_result(4, "naive tensor-product trace identity")
}

/// Criterion 5: hierarchy right-hand side against the finite-difference
/// derivative of an exactly propagated Hubbard chain.
pub fn criterion_5() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let n = 3;
    let h = hubbard_chain(d, 1.0, 0.7).expect("hermitian");
    let basis = sector(d, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let rho0 = sample::density(&mut rng, &basis);
    let (w, vecs) = linalg::hermitian_eigen(h.sector_matrix(&basis).unwrap().matrix());
    let rho_eig = vecs.adjoint() * rho0.matrix() * &vecs;
    let state_at = |t: f64| -> DensityMatrix {
        let mut m = rho_eig.clone();
        for r in 0..w.len() {
            for cc in 0..w.len() {
                m[(r, cc)] *= (-I * (w[r] - w[cc]) * t).exp();
            }
        }
        DensityMatrix::new_unchecked(basis.clone(), &vecs * m * vecs.adjoint())
    };
    let dt = 1e-4;
    let mut worst = [0.0f64; 2];
    for k in 0..20 {
        let t = 0.1 + 0.1 * k as f64;
        let plus = state_at(t + dt);
        let minus = state_at(t - dt);
        let center = state_at(t);
        for m in 1..=2usize {
            let fd = (partial_trace(&plus, m).unwrap().matrix()
                - partial_trace(&minus, m).unwrap().matrix())
                / C64::new(2.0 * dt, 0.0);
            let rho_m = partial_trace(&center, m).unwrap();
            let rho_m1 = partial_trace(&center, m + 1).unwrap();
            let rhs = bbgky_rhs(m, &rho_m, &rho_m1, &h, n).unwrap() / I;
            let rel = linalg::frobenius(&(fd - &rhs)) / linalg::frobenius(&rhs);
            worst[m - 1] = worst[m - 1].max(rel);
        }
    }
    c.bound(
        "relative residual, single-particle equation",
        worst[0],
        1e-5,
    );
    c.bound("relative residual, two-particle equation", worst[1], 1e-5);
    c.into_result(5, "hierarchy consistency against exact dynamics")
}

const SCALING_TIME: f64 = 0.4;
const SCALING_G: f64 = 0.4;

/// Criterion 6: mean-field limits — exact agreement at g = 0 and
/// quadratic error scaling in g.
pub fn criterion_6() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let amps = sample::product_amplitudes(&mut rng, d);
    let b1 = sector(d, 1).unwrap();
    let bn = sector(d, n).unwrap();
    let phi0 = MeanFieldState::new(
        product_state_vector(&amps, &b1)
            .unwrap()
            .amplitudes()
            .clone(),
    )
    .unwrap();
    // g = 0: mean field is exact for the reduced single-particle state
    {
        let h = hubbard_chain(d, 1.0, 0.0).unwrap();
        let grid = TimeGrid::from_zero(10.0, 0.5).unwrap();
        let rho0 = product_state_density(&amps, &bn).unwrap();
        let exact = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        let mf = propagate_mean_field(&phi0, &h, n, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for (state, (_, phi)) in exact.states.iter().zip(&mf) {
            let exact_r1 = partial_trace(state, 1).unwrap();
            worst = worst.max(linalg::trace_distance(exact_r1.matrix(), &phi.density()));
        }
        c.bound("g = 0 trace distance over t in [0, 10/J]", worst, 1e-8);
    }
    // error scaling: halving g should shrink the truncation error ~4x
    let error_at = |g: f64| -> f64 {
        let h = hubbard_chain(d, 1.0, g).unwrap();
        let grid = TimeGrid::from_zero(SCALING_TIME, SCALING_TIME).unwrap();
        let rho0 = product_state_density(&amps, &bn).unwrap();
        let exact = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        let exact_r1 = partial_trace(exact.states.last().unwrap(), 1).unwrap();
        let mf = propagate_mean_field(&phi0, &h, n, &grid).unwrap();
        linalg::trace_distance(exact_r1.matrix(), &mf.last().unwrap().1.density())
    };
    let e_full = error_at(SCALING_G);
    let e_half = error_at(SCALING_G / 2.0);
    let exponent = (e_full / e_half).log2();
    c.check(
        (1.6..=2.4).contains(&exponent),
        "error-scaling exponent in g",
        format!(
            "exponent {exponent:.3} from distances {e_full:.3e} (g={SCALING_G}) and {e_half:.3e} (g={})",
            SCALING_G / 2.0
        ),
    );
    c.into_result(6, "mean-field limits")
}

/// Criterion 7: the stencil GPE integrator agrees with the generic
/// mean-field route, conserves norm and energy, and reproduces the free
/// dispersion.
pub fn criterion_7() -> CriterionResult {
    let mut c = Checker::new();
    let lattice = LatticeConfig {
        sites: 6,
        spacing: 1.0,
        boundary: Boundary::Periodic,
        tilt: 0.0,
        onsite_g: 0.5,
        mass: 0.5,
    };
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC7);
    let phi0 = MeanFieldState::new(sample::pure_vector(&mut rng, lattice.sites)).unwrap();
    // the step-halving integrator lands at >= 1e3 RK4 steps over this
    // horizon (initial count ~ t1·||H_eff||/0.05, then at least one doubling)
    let grid = TimeGrid::from_zero(8.0, 0.2).unwrap();
    let gpe = propagate_gpe(&lattice, &phi0, n, &grid).unwrap();
    let h = lattice.hamiltonian().unwrap();
    let mf = propagate_mean_field(&phi0, &h, n, &grid).unwrap();
    let mut worst: f64 = 0.0;
    for ((_, a), (_, b)) in gpe.iter().zip(&mf) {
        worst = worst.max((a.amplitudes() - b.amplitudes()).norm());
    }
    c.bound("GPE == generic mean field, pointwise", worst, 1e-9);
    let norm_drift = gpe
        .iter()
        .map(|(_, s)| (s.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    c.bound("norm drift", norm_drift, 1e-9);
    let e0 = gpe_energy(&lattice, &phi0, n);
    let energy_drift = gpe
        .iter()
        .map(|(_, s)| (gpe_energy(&lattice, s, n) - e0).abs())
        .fold(0.0, f64::max);
    c.bound("energy-functional drift", energy_drift, 1e-8);
    // free plane wave: exact phase evolution at the lattice dispersion
    {
        let free = LatticeConfig {
            onsite_g: 0.0,
            ..lattice
        };
        let dsites = free.sites;
        let k = 1;
        let phase = C64::new(0.0, std::f64::consts::TAU * k as f64 / dsites as f64).exp();
        let plane = MeanFieldState::new(CVector::from_fn(dsites, |x, _| {
            phase.powu(x as u32) / C64::new((dsites as f64).sqrt(), 0.0)
        }))
        .unwrap();
        let grid = TimeGrid::from_zero(2.0, 0.25).unwrap();
        let traj = propagate_gpe(&free, &plane, n, &grid).unwrap();
        let ek =
            2.0 * free.hopping() * (1.0 - (std::f64::consts::TAU * k as f64 / dsites as f64).cos());
        let mut worst: f64 = 0.0;
        for (t, s) in &traj {
            let expect = plane.amplitudes() * (-I * ek * *t).exp();
            worst = worst.max((s.amplitudes() - expect).norm());
        }
        c.bound("plane-wave dispersion phase", worst, 1e-9);
    }
    c.into_result(7, "Gross-Pitaevskii equivalence and conservation")
}

/// Criterion 8: dissipative structure — form equivalence, trace-freeness,
/// Hermiticity preservation, tensor symmetries, and the B-operator trace
/// identity.
pub fn criterion_8() -> CriterionResult {
    let mut c = Checker::new();
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC8);
    let h1 = sample::one_body(&mut rng, d);
    let h2 = sample::two_body(&mut rng, d);
    let b1 = sector(d, 1).unwrap();
    let rho1 = sample::density(&mut rng, &b1);
    let t = 0.8;
    let spec = QuadratureSpec::fixed(QuadratureRule::Trapezoid, 64);
    let gamma = gamma_tensor(t, rho1.matrix(), &h2, &h1, &spec).unwrap();
    let (g, s) = gamma_s_split(&gamma);
    let ls = lamb_shift(&s, &b1).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = C64::new(1.0, 0.0);
            let via_hc = dissipator_hc_form(t, &unit, rho1.matrix(), &h2, &h1, &b1, &spec).unwrap();
            let via_split = linalg::commutator(ls.matrix(), &unit) * (-I)
                + dissipator_apply(&g, &unit, &b1).unwrap();
            worst = worst.max(max_abs(&(via_hc - via_split)));
        }
    }
    c.bound(
        "pre-split vs Lamb-shift+Lindblad on matrix units",
        worst,
        1e-10,
    );
    // trace-freeness of the dissipator for arbitrary gamma
    let noise = sample::matrix(&mut rng, d * d, d * d);
    let arbitrary = Rank4::new(d, noise);
    let rho_probe = sample::density(&mut rng, &b1);
    let out = dissipator_apply(&arbitrary, rho_probe.matrix(), &b1).unwrap();
    c.bound(
        "dissipator trace-freeness",
        linalg::trace(&out).norm(),
        1e-12,
    );
    // Hermiticity preservation of the assembled right-hand side
    let h2_i = bosedyn_core::dissipator::interaction_two_body(&h2, &h1, t);
    let c_i = mean_field_potential(rho1.matrix(), &h2_i).unwrap();
    let rhs = lindblad_rhs(&rho_probe, &g, &ls, &h2_i, &c_i, 4).unwrap();
    c.bound(
        "Hermiticity preservation",
        linalg::hermiticity_deviation(&rhs),
        1e-12,
    );
    // gamma conjugation symmetry and exact reconstruction
    c.bound(
        "gamma conjugation symmetry",
        g.conjugation_symmetry_deviation(),
        1e-14,
    );
    let rec = g.entries() * C64::new(0.5, 0.0) + s.entries() * I;
    c.bound(
        "gamma/2 + iS reconstructs the autocorrelation tensor",
        max_abs(&(rec - gamma.tensor.entries())),
        1e-14,
    );
    // autocorrelation tensor vanishes exactly at t = 0
    let g0 = gamma_tensor(0.0, rho1.matrix(), &h2, &h1, &spec).unwrap();
    c.check(
        max_abs(g0.tensor.entries()) == 0.0,
        "empty memory integral",
        "gamma(0) identically zero".into(),
    );
    // B-operator trace identity at 10 random times
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let tt: f64 = rng.gen_range(0.0..3.0);
        worst = worst.max(b_trace_identity_deviation(tt, &h2, &h1).unwrap());
    }
    c.bound("B-operator trace identity", worst, 1e-11);
    c.into_result(8, "dissipative structure")
}

const DISSIPATIVE_G: f64 = 0.4;

/// Criterion 9: dissipative propagation sanity on a two-site double well.
/// The trace-drift clauses are implemented as specified; note that every
/// term of the generator is traceless by construction, so the measured
/// drift is integrator roundoff. Purity decay is the quantity with a
/// genuine quadratic response; its exponent is reported alongside.
pub fn criterion_9() -> CriterionResult {
    let mut c = Checker::new();
    let d = 2;
    let n = 2;
    let b1 = sector(d, 1).unwrap();
    let phi = CVector::from_vec(vec![
        C64::new((0.7f64).sqrt(), 0.0),
        C64::new(0.0, (0.3f64).sqrt()),
    ]);
    let rho0 = DensityMatrix::new(b1.clone(), &phi * phi.adjoint()).unwrap();
    let spec = QuadratureSpec::default();
    let run = |g: f64| {
        let h = hubbard_chain(d, 1.0, g).unwrap();
        let grid = TimeGrid::from_zero(1.0, 0.5).unwrap();
        propagate_dissipative_mean_field(&rho0, &h, n, &grid, &spec).unwrap()
    };
    let full = run(DISSIPATIVE_G);
    let half = run(DISSIPATIVE_G / 2.0);
    let drift_of = |traj: &bosedyn_core::dissipator::DissipativeTrajectory| {
        (traj.diagnostics.last().unwrap().trace - C64::new(1.0, 0.0)).norm()
    };
    let purity_decay_of = |traj: &bosedyn_core::dissipator::DissipativeTrajectory| {
        1.0 - traj.diagnostics.last().unwrap().purity
    };
    let drift_full = drift_of(&full);
    let drift_half = drift_of(&half);
    c.check(
        drift_full.is_finite(),
        "trace drift at t = 1/J is finite and reported",
        format!(
            "|Tr-1| = {drift_full:.3e} (g={DISSIPATIVE_G}), {drift_half:.3e} (g={})",
            DISSIPATIVE_G / 2.0
        ),
    );
    let drift_exponent = (drift_full / drift_half).log2();
    c.check(
        (1.6..=2.4).contains(&drift_exponent),
        "trace-drift scaling exponent in g",
        format!(
            "exponent {drift_exponent:.3}; every generator term is traceless by construction, so this drift is integrator roundoff and carries no g^2 signal"
        ),
    );
    let monotone = full
        .diagnostics
        .windows(2)
        .all(|w| w[1].purity <= w[0].purity + 1e-12);
    c.check(
        monotone,
        "purity decays monotonically at short times",
        format!(
            "purity sequence {:?}",
            full.diagnostics
                .iter()
                .map(|d| (d.purity * 1e6).round() / 1e6)
                .collect::<Vec<_>>()
        ),
    );
    let p_full = purity_decay_of(&full);
    let p_half = purity_decay_of(&half);
    let purity_exponent = (p_full / p_half).log2();
    c.check(
        (1.6..=2.4).contains(&purity_exponent),
        "supplementary: purity-decay scaling exponent in g",
        format!("exponent {purity_exponent:.3} from decays {p_full:.3e} and {p_half:.3e}"),
    );
    // no interaction: coherent propagation keeps the state pure
    let h_free = Hamiltonian::new(
        hubbard_chain(d, 1.0, 0.0).unwrap().one_body().clone(),
        TwoBodyOperator::zero(d),
    )
    .unwrap();
    let grid = TimeGrid::from_zero(1.0, 0.25).unwrap();
    let free = propagate_dissipative_mean_field(&rho0, &h_free, n, &grid, &spec).unwrap();
    let purity_dev = free
        .diagnostics
        .iter()
        .map(|dg| (dg.purity - 1.0).abs())
        .fold(0.0, f64::max);
    c.bound("purity stays 1 without interaction", purity_dev, 1e-10);
    c.into_result(9, "dissipative propagation sanity")
}

const BLOCH_SITES: usize = 8;
const BLOCH_TILT: f64 = 2.0;
const BLOCH_G: f64 = 0.05;

fn bloch_config(dir: &std::path::Path) -> crate::config::ScenarioConfig {
    use crate::config::*;
    let period = std::f64::consts::TAU / BLOCH_TILT;
    // localized packet in the middle of the chain
    let width2 = 1.6f64;
    let center = (BLOCH_SITES as f64 - 1.0) / 2.0;
    let mut amps: Vec<[f64; 2]> = (0..BLOCH_SITES)
        .map(|x| {
            let dx = x as f64 - center;
            [(-dx * dx / (2.0 * width2)).exp(), 0.0]
        })
        .collect();
    let norm: f64 = amps.iter().map(|p| p[0] * p[0]).sum::<f64>().sqrt();
    for p in &mut amps {
        p[0] /= norm;
    }
    ScenarioConfig {
        d: BLOCH_SITES,
        n: 2,
        m: 1,
        h1: OneBodySpec::TightBinding {
            j: 1.0,
            tilt: BLOCH_TILT,
            boundary: BoundarySpec::Open,
        },
        h2: TwoBodySpec::Contact { g: BLOCH_G },
        initial_state: InitialStateSpec::Product { amplitudes: amps },
        grid: GridSpec {
            t1: 1.5 * period,
            dt_out: period / 48.0,
        },
        engines: vec![Engine::Exact, Engine::MeanField],
        observables: ObservableSet {
            occupations: true,
            momentum: true,
            purity: true,
            energy: true,
            trace_distance_exact: true,
            natural_occupations: false,
        },
        quadrature: QuadratureConfig::default(),
        output_dir: dir.to_path_buf(),
        seed: 7,
        dim_cap: bosedyn_core::tol::DEFAULT_DIM_CAP,
        hbar: 1.0,
        spacing: 1.0,
        snapshots: false,
        dump_basis: false,
    }
}

/// Criterion 10: harness determinism on the tilted-lattice scenario,
/// occupation sums, and the mean-field oscillation period against
/// 2πħ/(F·a).
pub fn criterion_10() -> CriterionResult {
    let mut c = Checker::new();
    let base = std::env::temp_dir().join(format!("bosedyn-selftest-{}", std::process::id()));
    let dir_a = base.join("run_a");
    let dir_b = base.join("run_b");
    let _ = std::fs::remove_dir_all(&base);
    let run = |dir: &std::path::Path| -> Result<(), crate::engines::RunError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| crate::engines::RunError::Config(e.to_string()))?;
        let cfg = bloch_config(dir);
        crate::engines::run_scenario(&cfg).map(|_| ())
    };
    if let Err(e) = run(&dir_a).and_then(|_| run(&dir_b)) {
        c.check(false, "scenario runs", format!("{e:?}"));
        return c.into_result(10, "harness determinism and oscillation period");
    }
    // byte-identical CSVs
    let mut identical = true;
    for name in ["exact.csv", "mean_field.csv"] {
        let a = std::fs::read(dir_a.join(name)).unwrap_or_default();
        let b = std::fs::read(dir_b.join(name)).unwrap_or_default();
        identical &= !a.is_empty() && a == b;
    }
    c.check(
        identical,
        "byte-identical CSVs for identical config and seed",
        "exact.csv and mean_field.csv compared".into(),
    );
    // occupation sums and the Bloch period from the mean-field output
    let text = std::fs::read_to_string(dir_a.join("mean_field.csv")).unwrap_or_default();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let occ_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("occ_"))
        .map(|(i, _)| i)
        .collect();
    let p_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("p_"))
        .map(|(i, _)| i)
        .collect();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let n = 2.0;
    let mut worst_sum: f64 = 0.0;
    let mut worst_momentum_sum: f64 = 0.0;
    for row in &rows {
        let s: f64 = occ_cols.iter().map(|&i| row[i]).sum();
        worst_sum = worst_sum.max((s - n).abs());
        let p: f64 = p_cols.iter().map(|&i| row[i]).sum();
        worst_momentum_sum = worst_momentum_sum.max((p - n).abs());
    }
    c.bound("occupation sum equals N on every row", worst_sum, 1e-8);
    c.bound(
        "momentum-distribution sum equals N on every row",
        worst_momentum_sum,
        1e-8,
    );
    // period: the momentum distribution returns to its initial shape
    let p0: Vec<f64> = p_cols.iter().map(|&i| rows[0][i]).collect();
    let dist_to_start = |row: &Vec<f64>| -> f64 {
        p_cols
            .iter()
            .enumerate()
            .map(|(k, &i)| (row[i] - p0[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let period = std::f64::consts::TAU / BLOCH_TILT;
    let dt_out = period / 48.0;
    let mut best_idx = 0usize;
    let mut best_d = f64::INFINITY;
    for (idx, row) in rows.iter().enumerate() {
        let t = row[0];
        if t > 0.5 * period && t < 1.5 * period {
            let dd = dist_to_start(row);
            if dd < best_d {
                best_d = dd;
                best_idx = idx;
            }
        }
    }
    // parabolic interpolation of the recurrence minimum between grid points
    let best_t = if best_idx > 0 && best_idx + 1 < rows.len() {
        let (dm, d0, dp) = (
            dist_to_start(&rows[best_idx - 1]),
            dist_to_start(&rows[best_idx]),
            dist_to_start(&rows[best_idx + 1]),
        );
        let denom = dm - 2.0 * d0 + dp;
        let shift = if denom.abs() > 1e-300 {
            0.5 * (dm - dp) / denom
        } else {
            0.0
        };
        rows[best_idx][0] + shift.clamp(-1.0, 1.0) * dt_out
    } else {
        rows[best_idx][0]
    };
    c.check(
        (best_t - period).abs() <= dt_out + 1e-12,
        "mean-field oscillation period",
        format!(
            "recurrence at t = {best_t:.4} vs 2πħ/(F·a) = {period:.4} (one output step = {dt_out:.4})"
        ),
    );
    let _ = std::fs::remove_dir_all(&base);
    c.into_result(10, "harness determinism and oscillation period")
}

pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
