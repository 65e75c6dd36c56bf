//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use hyperstab::cordes::{check_cordes, CoefficientField, CordesReport};
use hyperstab::dynamics::{Forcing, Harmonic, ProblemInstance, ProfileTerm, VectorProfile};
use hyperstab::energy::{conic_combine, quadratic_model, saturating_model, SpatialCoefficient, StoredEnergy};
use hyperstab::grid::{make_grid, Field, FieldShape, Grid};

/// Smooth right-hand side with one component per displacement entry.
pub fn rhs(grid: &Grid) -> Field {
    Field::from_fn(grid, FieldShape::Vector, |x, o| {
        for (k, v) in o.iter_mut().enumerate() {
            *v = x.iter().map(|xi| ((k + 1) as f64 * PI * xi).sin()).product();
        }
    })
    .expect("sine rhs vanishes on the boundary")
}

/// Variable Cordes-passing coefficients on a 2D scalar grid.
pub fn coefficients(res: usize) -> (CoefficientField, CordesReport, Field) {
    let g = make_grid(2, 1, res).expect("grid");
    let c = CoefficientField::from_fn(&g, |x, a| {
        let s = 0.2 * (PI * x[0]).sin() * (PI * x[1]).cos();
        a.copy_from_slice(&[1.0 + 0.5 * x[0], s, s, 1.2 - 0.3 * x[1]]);
    })
    .expect("coefficients");
    let rep = check_cordes(&c).expect("cordes");
    let f = rhs(&g);
    (c, rep, f)
}

/// Mixed saturating/quadratic problem in 1D with two components.
pub fn problem(res: usize, t_final: f64) -> ProblemInstance {
    let g = make_grid(1, 2, res).expect("grid");
    let q: Arc<dyn StoredEnergy> = Arc::new(quadratic_model(0.5, 1).expect("quadratic"));
    let s: Arc<dyn StoredEnergy> = Arc::new(
        saturating_model(0.5, SpatialCoefficient::Bump { base: 0.2, amplitude: 0.1 }, 1.0, 1).expect("saturating"),
    );
    let material = conic_combine(vec![s, q], vec![1.0, 0.6], SpatialCoefficient::constant(1.0), 1).expect("material");
    let u0 = VectorProfile::new(vec![ProfileTerm::sine(0, 0.01, vec![1]), ProfileTerm::sine(1, 0.005, vec![2])])
        .sample(&g)
        .expect("u0");
    let u1 = Field::zeros(&g, FieldShape::Vector);
    let forcing = Forcing::separable(
        VectorProfile::new(vec![ProfileTerm::sine(0, 0.01, vec![1])]),
        Harmonic::new(2.0 * PI, 0.0),
    );
    ProblemInstance::new(material, u0, u1, forcing, t_final).expect("problem")
}
