use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rwf_core::generators::{generate, GeneratorSpec};
use rwf_core::rwf::kernel_matvec;
use rwf_core::{approximate_kernel, ApproxConfig, Graph, KernelFunction};

fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j, x) in g.edges() {
        w[(i, j)] = x;
        w[(j, i)] = x;
    }
    let d: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - w[(i, j)] / (d[i] * d[j]).sqrt()
    })
}

fn eig(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let e = faer::Mat::from_fn(n, n, |i, j| a[(i, j)])
        .self_adjoint_eigen(faer::Side::Lower)
        .unwrap();
    (DVector::from_fn(n, |i, _| e.S()[i]), DMatrix::from_fn(n, n, |i, j| e.U()[(i, j)]))
}

fn kernel(vals: &DVector<f64>, vecs: &DMatrix<f64>, h: impl Fn(f64) -> f64) -> DMatrix<f64> {
    vecs * DMatrix::from_diagonal(&vals.map(h)) * vecs.transpose()
}

fn sym_norm(a: &DMatrix<f64>) -> f64 {
    eig(a).0.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn full_rank_error_is_the_polynomial_error() {
    let g = generate(&GeneratorSpec::swiss_roll(150, 3)).unwrap();
    let h = KernelFunction::diffusion(2.0).unwrap();
    let mut cfg = ApproxConfig::new(h.clone(), 150, 5);
    cfg.r = Some(0);
    let emb = approximate_kernel(&g, &cfg).unwrap();
    assert_eq!((emb.k(), emb.r()), (150, 0));

    let (vals, vecs) = eig(&dense_laplacian(&g));
    let gamma = kernel(&vals, &vecs, |l| h.eval(l));
    let p_h = emb.filter_h();
    let eps = vals.iter().fold(0.0_f64, |m, &l| m.max((h.sqrt_eval(l) - p_h.eval(l)).abs()));
    let err = sym_norm(&(&gamma - emb.gram())) / sym_norm(&gamma);
    assert!(err <= 2.0 * eps + eps * eps + 1e-12, "{err} vs eps_h {eps}");
}

#[test]
fn cycle_with_known_threshold_tracks_best_rank() {
    let n = 500;
    let g = generate(&GeneratorSpec::cycle(n)).unwrap();
    let h = KernelFunction::diffusion(5.0).unwrap();
    let mut spectrum: Vec<f64> = (0..n).map(|k| 1.0 - (2.0 * PI * k as f64 / n as f64).cos()).collect();
    spectrum.sort_by(f64::total_cmp);

    let mut cfg = ApproxConfig::new(h.clone(), 100, 0);
    cfg.r = Some(15);
    cfg.lambda_k = Some(spectrum[99]);
    let emb = approximate_kernel(&g, &cfg).unwrap();
    assert_eq!(emb.phi().shape(), (115, n));

    let (vals, vecs) = eig(&dense_laplacian(&g));
    let gamma = kernel(&vals, &vecs, |l| h.eval(l));
    let err = sym_norm(&(&gamma - emb.gram())) / sym_norm(&gamma);
    let best = h.eval(spectrum[100]);
    assert!(err <= 5.0 * best, "{err} vs best {best}");
}

#[test]
fn approximation_is_symmetric_psd_and_reproducible() {
    let g = generate(&GeneratorSpec::community(120, 4, 2)).unwrap();
    let cfg = ApproxConfig::new(KernelFunction::regularized_laplacian(2.0, 2).unwrap(), 8, 17);
    let a = approximate_kernel(&g, &cfg).unwrap();
    let b = approximate_kernel(&g, &cfg).unwrap();
    assert_eq!(a.phi(), b.phi());

    let gram = a.gram();
    assert!((&gram - gram.transpose()).amax() <= 1e-14 * gram.amax());
    let (vals, _) = eig(&gram);
    assert!(vals.min() >= -1e-10 * vals.max());

    let x: Vec<f64> = (0..120).map(|i| (i as f64 * 0.37).sin()).collect();
    let got = DVector::from_vec(kernel_matvec(&a, &x).unwrap());
    let want = &gram * DVector::from_column_slice(&x);
    assert!((&got - &want).norm() <= 1e-12 * want.norm());
}
