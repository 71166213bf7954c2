use super::params::Parameters;

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` per coordinate.
pub fn finite_diff_grad<P, F>(mut f: F, params: &P, h: f64) -> P
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let base = params.flat();
    let mut probe = params.clone();
    let mut grad = vec![0.0; base.len()];
    let mut values = base.clone();
    for i in 0..base.len() {
        values[i] = base[i] + h;
        probe.set_flat(&values);
        let plus = f(&probe);
        values[i] = base[i] - h;
        probe.set_flat(&values);
        let minus = f(&probe);
        values[i] = base[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    let mut out = params.clone();
    out.set_flat(&grad);
    out
}
