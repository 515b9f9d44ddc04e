use spikelab::emden::{solve_emden_with, EmdenConfig};
use spikelab::green::kr_hamiltonian;
use spikelab::profile::build_profile;
use spikelab::{EmdenSolution, GreenFn, KrConfig, Shape};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static EMDEN: RefCell<Option<Arc<EmdenSolution>>> = const { RefCell::new(None) };
}

/// Emden solution for `p`, reusing the last one while `p` is unchanged.
fn emden(p: f64) -> Result<Arc<EmdenSolution>, String> {
    EMDEN.with(|cell| {
        if let Some(e) = cell.borrow().as_ref().filter(|e| e.p == p) {
            return Ok(e.clone());
        }
        let cfg = EmdenConfig { samples: 4000, ..Default::default() };
        let e = Arc::new(solve_emden_with(p, 1e-10, &cfg).map_err(|e| e.to_string())?);
        *cell.borrow_mut() = Some(e.clone());
        Ok(e)
    })
}

fn check_samples(n: usize) -> Result<(), String> {
    if (2..=100_000).contains(&n) {
        Ok(())
    } else {
        Err(format!("sample count must lie in [2, 100000], got {n}"))
    }
}

pub fn emden_profile(p: f64, n: usize) -> Result<Vec<f64>, String> {
    check_samples(n)?;
    let e = emden(p)?;
    let mut out = vec![e.phi0, e.dphi1, e.i_pm1, e.i_p, e.i_pp1];
    for i in 0..n {
        let r = i as f64 / (n - 1) as f64;
        out.extend([r, e.eval_phi(r).map_err(|e| e.to_string())?]);
    }
    Ok(out)
}

pub fn spike_profile(p: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    check_samples(n)?;
    let prof = build_profile(emden(p)?, eps, 1.0, 0.0, 1e-13).map_err(|e| e.to_string())?;
    let c = prof.constraint_parameters();
    let mut out = vec![prof.s_eps, prof.theta(), c.alpha_abs, c.lambda];
    for i in 0..n {
        let r = prof.r2 * i as f64 / (n - 1) as f64;
        out.extend([r, prof.eval_radial(r).map_err(|e| e.to_string())?]);
    }
    Ok(out)
}

pub fn domain(rect: bool, lx: f64, ly: f64) -> Shape {
    if rect {
        Shape::Rect { lx, ly }
    } else {
        Shape::Disk { radius: 1.0 }
    }
}

pub fn kr_landscape(shape: Shape, nx: usize, ny: usize, partners: &[f64]) -> Result<Vec<f64>, String> {
    check_samples(nx)?;
    check_samples(ny)?;
    if !partners.len().is_multiple_of(2) {
        return Err("partners must be x, y pairs".into());
    }
    let green = GreenFn::for_shape(shape).map_err(|e| e.to_string())?;
    let fixed: Vec<[f64; 2]> = partners.chunks(2).map(|c| [c[0], c[1]]).collect();
    if let Some(q) = fixed.iter().find(|q| !shape.contains(**q)) {
        return Err(format!("partner {q:?} lies outside the domain"));
    }
    let (x0, y0, w, h) = match shape {
        Shape::Disk { radius } => (-radius, -radius, 2.0 * radius, 2.0 * radius),
        Shape::Rect { lx, ly } => (0.0, 0.0, lx, ly),
    };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            // Cell centres, so the boundary itself is never sampled.
            let x = [x0 + w * (i as f64 + 0.5) / nx as f64, y0 + h * (j as f64 + 0.5) / ny as f64];
            let mut points = vec![x];
            points.extend(&fixed);
            let cfg = KrConfig::new(points, vec![1.0; fixed.len() + 1]);
            out.push(if shape.contains(x) { kr_hamiltonian(&green, &cfg).unwrap_or(f64::NAN) } else { f64::NAN });
        }
    }
    Ok(out)
}
