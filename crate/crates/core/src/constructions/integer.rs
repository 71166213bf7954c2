use crate::error::{Error, Result};
use crate::neural::{Activation, DenseLayer, DenseParams, Matrix};

/// `f(n) = w2ᵀ relu(w1·n − b)` fitting `f(n) = y_n` for `1 <= n <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegerMemorizer {
    pub w1: Vec<f64>,
    pub b: Vec<f64>,
    pub w2: Vec<f64>,
}

/// `w1 = 1`, `b = (0, …, N−1)`, and `w2` solves the lower-triangular system
/// `y_i = Σ_{j<=i} (i − j + 1) a_j`.
pub fn build_integer_memorizer(ys: &[f64]) -> Result<IntegerMemorizer> {
    let n = ys.len();
    if n == 0 {
        return Err(Error::InvalidArgument("integer memorizer needs N >= 1".into()));
    }
    if !ys.iter().all(|y| y.is_finite()) {
        return Err(Error::NonFinite("memorizer targets"));
    }
    let mut a = vec![0.0; n];
    for i in 0..n {
        let carried: f64 = (0..i).map(|j| (i - j + 1) as f64 * a[j]).sum();
        a[i] = ys[i] - carried;
    }
    Ok(IntegerMemorizer {
        w1: vec![1.0; n],
        b: (0..n).map(|i| i as f64).collect(),
        w2: a,
    })
}

impl IntegerMemorizer {
    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.w1
            .iter()
            .zip(&self.b)
            .zip(&self.w2)
            .map(|((w1, b), w2)| w2 * (w1 * n - b).max(0.0))
            .sum()
    }

    /// The same function as a 1 → N → 1 MLP.
    pub fn to_dense(&self) -> DenseParams {
        let n = self.len();
        let hidden = DenseLayer::new(
            Matrix::from_vec(n, 1, self.w1.clone()).expect("n × 1"),
            self.b.iter().map(|b| -b).collect(),
            Activation::Relu,
        )
        .expect("bias matches");
        let out = DenseLayer::new(
            Matrix::from_vec(1, n, self.w2.clone()).expect("1 × n"),
            vec![0.0],
            Activation::Identity,
        )
        .expect("bias matches");
        DenseParams::new(1, vec![hidden, out]).expect("dims chain")
    }
}

/// Value the memorizer takes beyond `N`: `(n − N + 1) y_N − (n − N) y_{N−1}`
/// with `y_0 = 0`.
pub fn extrapolate(ys: &[f64], n: usize) -> f64 {
    let big_n = ys.len();
    let y_n = ys[big_n - 1];
    let y_prev = if big_n >= 2 { ys[big_n - 2] } else { 0.0 };
    let k = n as f64 - big_n as f64;
    (k + 1.0) * y_n - k * y_prev
}
