use serde::{Deserialize, Serialize};

/// Estimate with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub value: f64,
    pub err: f64,
}

impl Stat {
    pub const NAN: Stat = Stat {
        value: f64::NAN,
        err: f64::NAN,
    };

    pub fn exact(value: f64) -> Self {
        Stat { value, err: 0.0 }
    }
}

/// Delete-one jackknife for an estimator that is a smooth function of
/// column means. `columns[k][i]` is the k-th quantity of sample `i`.
pub fn jackknife_means<F>(columns: &[&[f64]], f: F) -> Stat
where
    F: Fn(&[f64]) -> f64,
{
    let n = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let sums: Vec<f64> = columns.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let value = f(&full);
    if n < 2 {
        return Stat {
            value,
            err: f64::NAN,
        };
    }
    let mut loo = vec![0.0; columns.len()];
    let mut partial = Vec::with_capacity(n);
    for i in 0..n {
        for (k, c) in columns.iter().enumerate() {
            loo[k] = (sums[k] - c[i]) / (n - 1) as f64;
        }
        partial.push(f(&loo));
    }
    Stat {
        value,
        err: spread(&partial),
    }
}

/// Delete-one jackknife for an arbitrary estimator: `f(None)` uses every
/// sample, `f(Some(i))` leaves sample `i` out.
pub fn jackknife_by<F>(n: usize, f: F) -> Stat
where
    F: Fn(Option<usize>) -> f64,
{
    let value = f(None);
    if n < 2 {
        return Stat {
            value,
            err: f64::NAN,
        };
    }
    let partial: Vec<f64> = (0..n).map(|i| f(Some(i))).collect();
    Stat {
        value,
        err: spread(&partial),
    }
}

fn spread(partial: &[f64]) -> f64 {
    let n = partial.len() as f64;
    let mean = partial.iter().sum::<f64>() / n;
    let ss: f64 = partial.iter().map(|p| (p - mean).powi(2)).sum();
    ((n - 1.0) / n * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_error_equals_standard_error() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let s2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let jk = jackknife_means(&[&xs], |m| m[0]);
        assert!((jk.value - mean).abs() < 1e-15);
        assert!((jk.err - (s2 / n).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn both_forms_agree() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let a = jackknife_means(&[&xs, &sq], |m| m[1] - m[0] * m[0]);
        let b = jackknife_by(xs.len(), |skip| {
            let kept: Vec<f64> = xs
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, x)| *x)
                .collect();
            let k = kept.len() as f64;
            let m = kept.iter().sum::<f64>() / k;
            kept.iter().map(|x| x * x).sum::<f64>() / k - m * m
        });
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.err - b.err).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let xs = [0.25; 10];
        let jk = jackknife_means(&[&xs], |m| m[0]);
        assert_eq!(jk.err, 0.0);
        assert!(jackknife_means(&[&[1.0]], |m| m[0]).err.is_nan());
    }
}
