// Float methods resolve through `num_traits::Float` (backed by libm) when the
// crate is built without std; under `cfg(test)` the inherent methods win.
#[allow(unused_imports)]
pub(crate) use num_traits::Float;

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub(crate) fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / SQRT_2PI
}
