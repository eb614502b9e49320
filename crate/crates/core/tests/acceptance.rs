//! Acceptance suite. Every criterion writes one `criterion N: PASS|FAIL` line
//! straight to stdout, so the lines survive libtest's output capture.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use ncmaj::algebra::{
    compress, compress_matrix, partial_trace_left, partial_trace_right, refines, tce, ProjectionSystem, SpectralList,
};
use ncmaj::hermitian::{
    apply_function, max_abs, max_abs_diff, random_contraction, random_hermitian, rng_from_seed,
    sample_hermitian, sample_unitary, CMatrix, Contraction, Hermitian, Psd, Spectrum, Unitary,
};
use ncmaj::klyachko::klyachko_feasible_sum;
use ncmaj::majorization::{majorizes, random_t_transform_image, schur_horn_construct};
use ncmaj::nc_schur_horn::{
    block_feasible_unitary, bourin_decomposition, convexity_counterexample, ext_majorizes, jensen_check,
    jensen_check_scaled, monotone_transport, nc_horn_lemma, witness_contraction_from_unitaries,
    witness_unitaries_from_contraction, Mode,
};
use ncmaj::oracle::{cross_validate, realize_block_compression, OracleBudget, SumInstance};
use ncmaj::Verdict;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("criterion {id:>2}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn complex_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let re = sample_hermitian(n, rng);
    let im = sample_hermitian(n, rng);
    re + im * Complex64::i()
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> Psd {
    let g = complex_matrix(n, rng);
    Psd::from_matrix(&g * g.adjoint()).expect("G G* is PSD")
}

fn rank_deficient_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Psd {
    let g = complex_matrix(n, rng).columns(0, rank).into_owned();
    Psd::from_matrix(&g * g.adjoint()).expect("G G* is PSD")
}

fn random_ranks(n: usize, rng: &mut ChaCha8Rng) -> ProjectionSystem {
    let mut ranks = Vec::new();
    let mut left = n;
    while left > 0 {
        let r = rng.random_range(1..=left);
        ranks.push(r);
        left -= r;
    }
    ProjectionSystem::new(ranks).unwrap()
}

fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `X ⊗ 1_m` in the block layout where entry `(i, j)` of the right factor
/// selects the `d × d` block.
fn left_factor(x: &CMatrix, m: usize) -> CMatrix {
    let d = x.nrows();
    DMatrix::from_fn(d * m, d * m, |r, c| if r / d == c / d { x[(r % d, c % d)] } else { Complex64::new(0.0, 0.0) })
}

/// `1_d ⊗ Y` in the same layout.
fn right_factor(y: &CMatrix, d: usize) -> CMatrix {
    let m = y.nrows();
    DMatrix::from_fn(d * m, d * m, |r, c| if r % d == c % d { y[(r / d, c / d)] } else { Complex64::new(0.0, 0.0) })
}

fn spectrum_of(m: &CMatrix) -> Spectrum {
    Hermitian::symmetrized(m.clone()).spectrum()
}

#[test]
fn criterion_01_schur_horn() {
    let mut rng = rng_from_seed(101);
    let start = Instant::now();
    let (mut worst_diag, mut worst_spec) = (0.0_f64, 0.0_f64);
    for i in 0..1000 {
        let n = 1 + i % 8;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut x = random_t_transform_image(&y, 3 * n, &mut rng);
        x.shuffle(&mut rng);
        assert!(majorizes(&y, &x).unwrap());
        let a = schur_horn_construct(&x, &y).unwrap();
        let diag = a.diagonal();
        worst_diag = x.iter().zip(&diag).fold(worst_diag, |w, (p, q)| w.max((p - q).abs()));
        let mut ys = y.clone();
        ys.sort_by(|p, q| q.total_cmp(p));
        worst_spec = a.spectrum().values().iter().zip(&ys).fold(worst_spec, |w, (p, q)| w.max((p - q).abs()));
    }
    let elapsed = start.elapsed();
    let ok = worst_diag < 1e-9 && worst_spec < 1e-9 && elapsed < Duration::from_secs(5);
    report(
        1,
        ok,
        &format!("schur-horn 1000 pairs: diagonal {worst_diag:.1e}, spectrum {worst_spec:.1e}, {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(ok);
}

#[test]
fn criterion_02_convexity_counterexample() {
    let ranks = ProjectionSystem::new(vec![2]).unwrap();
    let ce = convexity_counterexample(2, &ranks).unwrap();
    let s_ok = ce.s.diagonal() == [2.0, 4.0] && max_abs(&(ce.s.matrix() - Hermitian::from_diagonal(&[2.0, 4.0]).matrix())) == 0.0;
    let t_ok = max_abs(&(ce.t.matrix() - Hermitian::from_diagonal(&[3.0, 3.0]).matrix())) == 0.0;
    let mid = (ce.s.matrix() + ce.v.conjugate(&ce.s).matrix()).map(|z| z * 0.5);
    let midpoint = max_abs_diff(&mid, ce.t.matrix());

    let direct = block_feasible_unitary(&ce.s.spectrum(), &[Spectrum::new(vec![3.0, 3.0])], &ranks, None).unwrap();
    let infeasible = ce.decision.is_infeasible() && ce.decision.certificate.is_some() && direct.is_infeasible();

    let budget = OracleBudget { restarts: 64, seed: 2, ..OracleBudget::default() };
    let oracle = realize_block_compression(&ce.s, &[Spectrum::new(vec![3.0, 3.0])], &ranks, Mode::Unitary, &budget).unwrap();

    let ok = s_ok && t_ok && infeasible && midpoint <= f64::EPSILON && oracle.residual > 0.1 && !oracle.found();
    report(
        2,
        ok,
        &format!(
            "counterexample: verdict {}, certificate {}, midpoint residual {midpoint:.1e}, oracle residual {:.3} over {} restarts",
            ce.decision.verdict,
            ce.decision.certificate.as_ref().map_or("none".into(), |c| c.to_string()),
            oracle.residual,
            oracle.restarts_used
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_klyachko_agreement() {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 2..=4usize {
        let instances: Vec<SumInstance> = (0..200).map(|i| SumInstance::random(n, 2, 3000 * n as u64 + i)).collect();
        let budget = OracleBudget { seed: 30 + n as u64, ..OracleBudget::default() };
        let rep = cross_validate(&instances, klyachko_feasible_sum, &budget).unwrap();
        let feasible = rep.feasible_count();
        let witnessed = rep.feasible_with_witness(1e-6);
        let inconclusive = rep.entries.iter().filter(|e| e.decision.verdict == Verdict::Inconclusive).count();
        ok &= rep.hard_failures.is_empty() && witnessed * 100 >= feasible * 99 && inconclusive == 0;
        parts.push(format!(
            "n={n}: {feasible} feasible ({witnessed} witnessed), {} hard failures",
            rep.hard_failures.len()
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    report(3, ok, &format!("klyachko vs oracle: {}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_04_reduction_identity() {
    let mut rng = rng_from_seed(404);
    let (mut agree, mut majorized) = (0, 0);
    let mut disagreements = Vec::new();
    for i in 0..500u64 {
        let n = 2 + (i % 5) as usize;
        let b = random_hermitian(n, 40_000 + i, None).unwrap();
        let lb = b.spectrum();
        let la: Vec<f64> = match i % 3 {
            0 => random_t_transform_image(lb.values(), 2 * n, &mut rng),
            1 => {
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let shift = (lb.sum() - v.iter().sum::<f64>()) / n as f64;
                v.iter_mut().for_each(|x| *x += shift);
                v
            }
            _ => {
                let mut v = random_t_transform_image(lb.values(), 2 * n, &mut rng);
                v.sort_by(|p, q| q.total_cmp(p));
                let eps = rng.random_range(0.0..0.3);
                v[0] += eps;
                v[n - 1] -= eps;
                v
            }
        };
        let a = random_hermitian(n, 50_000 + i, Some(&Spectrum::new(la.clone()))).unwrap();
        let expected = majorizes(lb.values(), a.spectrum().values()).unwrap();
        majorized += expected as usize;
        let d = ext_majorizes(&a, &b, &SpectralList::diagonal(n)).unwrap();
        if d.verdict != Verdict::Inconclusive && d.is_feasible() == expected {
            agree += 1;
        } else {
            disagreements.push(i);
        }
    }
    let ok = agree == 500;
    report(4, ok, &format!("reduction identity: {agree}/500 agree ({majorized} majorized), mismatches {disagreements:?}"));
    assert!(ok);
}

#[test]
fn criterion_05_refinement_monotonicity() {
    let pairs = [
        ("1:1,1:1,1:1", "2:1,1:1"),
        ("2:1,2:1", "4:1"),
        ("1:1,1:1,1:1,1:1", "2:1,2:1"),
        ("2:1,1:1,2:1", "3:1,2:1"),
        ("3:1,2:1,1:1", "4:1,2:1"),
        ("1:1,1:1,1:1,1:1,1:1,1:1", "3:1,3:1"),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (pi, (fine, coarse)) in pairs.iter().enumerate() {
        let fine: SpectralList = fine.parse().unwrap();
        let coarse: SpectralList = coarse.parse().unwrap();
        assert!(refines(&fine, &coarse).unwrap(), "{fine} should refine {coarse}");
        let n = fine.order();
        let mut feasible = 0;
        for i in 0..100u64 {
            let seed = 60_000 + 1000 * pi as u64 + i;
            let b = random_hermitian(n, seed, None).unwrap();
            let v = Unitary::new(sample_unitary(n, &mut rng_from_seed(seed ^ 0x5a5a))).unwrap();
            let w = Unitary::new(sample_unitary(n, &mut rng_from_seed(seed ^ 0xa5a5))).unwrap();
            let inner = tce(&coarse, v.conjugate(&b).matrix()).unwrap();
            let a = w.conjugate(&Hermitian::symmetrized(inner));
            feasible += ext_majorizes(&a, &b, &fine).unwrap().is_feasible() as usize;
        }
        ok &= feasible == 100;
        parts.push(format!("{fine} <= {coarse}: {feasible}/100"));
    }
    report(5, ok, &format!("refinement monotonicity: {}", parts.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_06_tce_axioms() {
    let lists: Vec<SpectralList> =
        ["1:1,1:1,1:1", "2:1,1:1", "1:3", "2:2", "1:2,2:1", "3:1,1:2", "2:3"].iter().map(|s| s.parse().unwrap()).collect();
    let mut rng = rng_from_seed(606);
    let mut worst = [0.0_f64; 4];
    for i in 0..200 {
        let l = &lists[i % lists.len()];
        let n = l.order();
        let x = complex_matrix(n, &mut rng);
        let y = complex_matrix(n, &mut rng);
        let p = if i % 2 == 0 { rank_deficient_psd(n, 1, &mut rng) } else { random_psd(n, &mut rng) };
        let ex = tce(l, &x).unwrap();
        worst[0] = worst[0].max(max_abs_diff(&tce(l, &ex).unwrap(), &ex));
        worst[1] = worst[1].max((trace(&ex) - trace(&x)).norm());
        let ep = Hermitian::symmetrized(tce(l, p.matrix()).unwrap()).min_eigenvalue();
        worst[2] = worst[2].max(-ep);
        let lhs = trace(&(&ex * &y));
        let rhs = trace(&(&x * tce(l, &y).unwrap()));
        worst[3] = worst[3].max((lhs - rhs).norm());
    }
    let ok = worst.iter().all(|w| *w <= 1e-12);
    report(
        6,
        ok,
        &format!(
            "tce axioms over {} lists: idempotence {:.1e}, trace {:.1e}, positivity {:.1e}, self-adjointness {:.1e}",
            lists.len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_partial_trace_duality() {
    let shapes = [(1, 4), (2, 2), (2, 3), (3, 2)];
    let mut rng = rng_from_seed(707);
    let (mut worst_right, mut worst_left) = (0.0_f64, 0.0_f64);
    for i in 0..200 {
        let (d, m) = shapes[i % shapes.len()];
        let c = complex_matrix(d * m, &mut rng);
        let x = complex_matrix(d, &mut rng);
        let y = complex_matrix(m, &mut rng);
        let lhs = trace(&(partial_trace_right(&c, d, m).unwrap() * &x));
        let rhs = trace(&(&c * left_factor(&x, m)));
        worst_right = worst_right.max((lhs - rhs).norm());
        let lhs = trace(&(partial_trace_left(&c, d, m).unwrap() * &y));
        let rhs = trace(&(&c * right_factor(&y, d)));
        worst_left = worst_left.max((lhs - rhs).norm());
    }
    let ok = worst_right <= 1e-12 && worst_left <= 1e-12;
    report(7, ok, &format!("partial-trace duality: Tr_m {worst_right:.1e}, Tr_d {worst_left:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_08_nc_horn_lemma() {
    let shapes = [(1, 4), (2, 2), (2, 3), (3, 3)];
    let mut rng = rng_from_seed(808);
    let (mut blocks, mut tr, mut factor_sum, mut factor_blocks, mut traced) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..100 {
        let (d, m) = shapes[i % shapes.len()];
        let n = d * m;
        let a = if i % 5 == 4 { rank_deficient_psd(n, n / 2, &mut rng) } else { random_psd(n, &mut rng) };
        let h = nc_horn_lemma(&a, d, m).unwrap();
        let p = ProjectionSystem::new(vec![d; m]).unwrap();
        let rotated = h.u.conjugate(a.hermitian());
        let comp = compress(&p, rotated.matrix()).unwrap();
        let first = comp.blocks()[0].clone();
        for blk in comp.blocks() {
            blocks = blocks.max(max_abs_diff(blk, &first));
            blocks = blocks.max(max_abs_diff(blk, &h.d.matrix().map(|z| z / m as f64)));
        }
        tr = tr.max((trace(h.d.matrix()) - trace(a.matrix())).norm());

        let sum = h.factors.iter().fold(CMatrix::zeros(n, n), |acc, x| acc + x * x.adjoint()) / Complex64::from(m as f64);
        factor_sum = factor_sum.max(max_abs_diff(&sum, a.matrix()));
        let target = partial_trace_right(rotated.matrix(), d, m).unwrap();
        for (j, (x, uj)) in h.factors.iter().zip(&h.factor_unitaries).enumerate() {
            let inner = uj.matrix().adjoint() * x * x.adjoint() * uj.matrix();
            let expected = ncmaj::algebra::embed_block(&p, j, h.d.matrix());
            factor_blocks = factor_blocks.max(max_abs_diff(&inner, &expected));
            traced = traced.max(max_abs_diff(&partial_trace_right(&inner, d, m).unwrap(), &target));
        }
    }
    let ok = blocks <= 1e-10 && tr <= 1e-10 && factor_sum <= 1e-8 && factor_blocks <= 1e-8 && traced <= 1e-8;
    report(
        8,
        ok,
        &format!(
            "nc horn lemma: blocks {blocks:.1e}, trace {tr:.1e}, factor sum {factor_sum:.1e}, factor blocks {factor_blocks:.1e}, traced {traced:.1e}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_jensen_sweep() {
    let mut rng = rng_from_seed(909);
    let (mut passed, mut rechecked) = (0, 0);
    for i in 0..500u64 {
        let n = 2 + (i % 7) as usize;
        let kinks = rng.random_range(1..=3);
        let slopes: Vec<f64> = (0..kinks).map(|_| rng.random_range(0.0..2.0)).collect();
        let knots: Vec<f64> = (0..kinks).map(|_| rng.random_range(-2.0..2.0)).collect();
        let floor = rng.random_range(0.0..1.0);
        let f = move |t: f64| floor + slopes.iter().zip(&knots).map(|(s, k)| s * (t - k).max(0.0)).sum::<f64>();
        let a = random_hermitian(n, 90_000 + i, None).unwrap();
        let p = random_ranks(n, &mut rng);
        if jensen_check(&f, &a, &p).unwrap() {
            passed += 1;
        } else if jensen_check_scaled(&f, &a, &p, 10.0).unwrap() {
            passed += 1;
            rechecked += 1;
        }
    }
    let ok = passed == 500;
    report(9, ok, &format!("jensen sweep: {passed}/500 dominated ({rechecked} at 10x tolerance)"));
    assert!(ok);
}

#[test]
fn criterion_10_bourin() {
    let fs: [fn(f64) -> f64; 3] = [|t| t * t, |t| 2.0 * (t - 1.0).max(0.0), |t| t * (t - 1.0).exp()];
    let mut rng = rng_from_seed(1010);
    let budget = OracleBudget::default();
    let (mut worst, mut passed, mut via_oracle) = (f64::INFINITY, 0, 0);
    for i in 0..100 {
        let n = 1 + i % 5;
        let (a, b) = if i % 10 == 9 {
            (rank_deficient_psd(n, 1, &mut rng), random_psd(n, &mut rng))
        } else {
            (random_psd(n, &mut rng), random_psd(n, &mut rng))
        };
        let norm = a.hermitian().add(b.hermitian()).spectrum().values()[0].max(1e-12);
        let k = rng.random_range(0.5..2.0) / norm;
        let a = Psd::from_matrix(a.matrix() * Complex64::from(k)).unwrap();
        let b = Psd::from_matrix(b.matrix() * Complex64::from(k)).unwrap();
        let mut all = true;
        for f in &fs {
            let d = bourin_decomposition(f, &a, &b, &budget).unwrap();
            let total = apply_function(f, &a.hermitian().add(b.hermitian())).unwrap();
            let fa = apply_function(f, a.hermitian()).unwrap();
            let fb = apply_function(f, b.hermitian()).unwrap();
            let gap = Hermitian::symmetrized(
                total.matrix() - d.u.conjugate(&fa).matrix() - d.v.conjugate(&fb).matrix(),
            )
            .min_eigenvalue();
            worst = worst.min(gap);
            all &= gap >= -1e-7;
            via_oracle += d.via_oracle as usize;
        }
        passed += all as usize;
    }
    let ok = passed == 100;
    report(
        10,
        ok,
        &format!(
            "bourin: {passed}/100 pairs over {} functions, worst min eigenvalue {worst:.2e}, oracle fallbacks {via_oracle}",
            fs.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_11_monotone_transport() {
    let mut rng = rng_from_seed(1111);
    let square = |t: f64| t * t;
    let (mut worst, mut completed) = (0.0_f64, 0);
    for i in 0..100u64 {
        let n = 2 + (i % 5) as usize;
        let b = random_psd(n, &mut rng);
        let w = random_contraction(n, 110_000 + i).unwrap();
        let p = random_ranks(n, &mut rng);
        let Ok(wt) = monotone_transport(&square, &b, &w, &p) else { continue };
        let fb = apply_function(square, b.hermitian()).unwrap();
        let a = compress(&p, &(w.matrix().adjoint() * b.matrix() * w.matrix())).unwrap();
        let pushed = compress(&p, &(wt.matrix().adjoint() * fb.matrix() * wt.matrix())).unwrap();
        for (ab, pb) in a.blocks().iter().zip(pushed.blocks()) {
            let fa = apply_function(square, &Hermitian::symmetrized(ab.clone())).unwrap();
            worst = worst.max(max_abs_diff(fa.matrix(), pb));
        }
        completed += (wt.norm() <= 1.0 + 1e-9) as usize;
    }
    let ok = completed == 100 && worst < 1e-7;
    report(11, ok, &format!("monotone transport: {completed}/100 chains, worst residual {worst:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_12_witness_round_trip() {
    let mut rng = rng_from_seed(1212);
    let (mut worst, mut completed) = (0.0_f64, 0);
    for i in 0..100u64 {
        let n = 1 + (i % 6) as usize;
        let s = if i % 4 == 3 && n > 1 { rank_deficient_psd(n, n - 1, &mut rng) } else { random_psd(n, &mut rng) };
        let v = random_contraction(n, 120_000 + i).unwrap();
        let p = random_ranks(n, &mut rng);
        let targets = compress(&p, &(v.matrix().adjoint() * s.matrix() * v.matrix())).unwrap();
        let vs = witness_unitaries_from_contraction(&s, &v, &p).unwrap();
        let blocks: Vec<Psd> = targets.blocks().iter().map(|b| Psd::from_matrix(b.clone()).unwrap()).collect();
        let back: Contraction = witness_contraction_from_unitaries(&s, &blocks, &vs, &p).unwrap();
        let got = compress_matrix(&p, &(back.matrix().adjoint() * s.matrix() * back.matrix())).unwrap();
        let residual = max_abs_diff(&got, &targets.to_matrix());
        worst = worst.max(residual);
        let spectra_match = p.intervals().iter().all(|&(lo, hi)| {
            let got_block = got.view((lo, lo), (hi - lo, hi - lo)).into_owned();
            let want_block = targets.to_matrix().view((lo, lo), (hi - lo, hi - lo)).into_owned();
            spectrum_of(&got_block)
                .values()
                .iter()
                .zip(spectrum_of(&want_block).values())
                .all(|(x, y)| (x - y).abs() < 1e-8)
        });
        completed += (spectra_match && back.norm() <= 1.0 + 1e-9) as usize;
    }
    let ok = completed == 100 && worst < 1e-8;
    report(12, ok, &format!("witness round trip: {completed}/100 instances, worst residual {worst:.1e}"));
    assert!(ok);
}
