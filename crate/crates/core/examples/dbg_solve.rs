use delayvar_core::*;
use std::sync::Arc;

fn main() {
    let p = PointDelayLagrangian::new(
        1, 0.5, 1.0,
        |_, _, _: &[f64], v: &[f64]| 0.5 * v[0] * v[0] + 0.5_f64 * 0.0,
        |_, _, _, _| vec![0.0],
        Some(Arc::new(|_, _: &[f64], b: &[f64], _: &[f64]| vec![b[0]])),
        |_, _, _, v| vec![v[0]],
    ).unwrap();
    // actual core: 0.5 v^2 + 0.5 b^2
    let p = PointDelayLagrangian::new(
        1, 0.5, 1.0,
        |_, _, b: &[f64], v: &[f64]| 0.5 * v[0] * v[0] + 0.5 * b[0] * b[0],
        |_, _, _, _| vec![0.0],
        Some(Arc::new(|_, _: &[f64], b: &[f64], _: &[f64]| vec![b[0]])),
        |_, _, _, v| vec![v[0]],
    ).unwrap();
    let _ = &p;
    let hist = HistoryFunction::constant(0.5, vec![1.0]).unwrap();
    for n in [8usize, 16] {
        let mut cfg = SolveConfig::new(n);
        cfg.grad_tol = 1e-10;
        cfg.max_iters = 500;
        let mut last = 0usize;
        let res = minimize_with(&p, &hist, &[2.0], &cfg, |rec| {
            if rec.iteration % 25 == 0 || rec.iteration < 8 {
                eprintln!("N={n} it={} J={:.12} g={:.3e} step={:.3e}", rec.iteration, rec.j_value, rec.grad_norm, rec.step);
            }
            last = rec.iteration;
        }).unwrap();
        eprintln!("N={n}: converged={} iters={} gnorm={:.3e} diag={:?}", res.converged, res.iterations, res.final_grad_norm, res.diagnostic);
    }
}
