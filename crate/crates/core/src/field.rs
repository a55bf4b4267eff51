//! Space-time scalar fields `(x, t) -> value`.

/// A function of one space coordinate and time.
///
/// Evaluation returns NaN outside the field's domain.
pub trait Field: Sync {
    fn eval(&self, x: f64, t: f64) -> f64;
}

impl<F> Field for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, x: f64, t: f64) -> f64 {
        self(x, t)
    }
}

impl<T: Field + ?Sized + Send> Field for std::sync::Arc<T> {
    fn eval(&self, x: f64, t: f64) -> f64 {
        (**self).eval(x, t)
    }
}
