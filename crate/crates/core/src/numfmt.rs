use serde::Serializer;

/// Rounds to 9 significant decimal digits.
///
/// The result is the `f64` nearest to the 9-digit decimal, so its shortest
/// round-trip representation never carries more than 9 digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub(crate) fn ser_sig9<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}
