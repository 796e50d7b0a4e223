use super::{ParamId, ParamStore, Tape, TensorError, Var};

/// Outcome of a central-difference gradient comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// max over entries of |analytic − numeric| / max(1, |numeric|)
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

fn evaluate<F, E>(f: &F, store: &ParamStore) -> Result<f64, E>
where
    F: Fn(&Tape, &ParamStore) -> Result<Var, E>,
    E: From<TensorError>,
{
    let tape = Tape::new();
    let loss = f(&tape, store)?;
    let value = tape.value(loss);
    if value.len() != 1 {
        return Err(TensorError::NonScalarLoss(value.shape().to_vec()).into());
    }
    Ok(value.item())
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `h` over every entry of every parameter in `store`.
///
/// `f` records a scalar loss on the tape it is given, reading parameters from
/// the store it is given.
pub fn finite_diff_check<F, E>(store: &ParamStore, h: f64, f: F) -> Result<FdReport, E>
where
    F: Fn(&Tape, &ParamStore) -> Result<Var, E>,
    E: From<TensorError>,
{
    if !(h > 0.0 && h <= 1e-2) {
        return Err(TensorError::InvalidStep(h).into());
    }
    let tape = Tape::new();
    let loss = f(&tape, store)?;
    let base = tape.value(loss).item();
    let analytic = tape.backward(loss, store)?;
    drop(tape);

    let again = evaluate(&f, store)?;
    if again.to_bits() != base.to_bits() {
        return Err(TensorError::NonDeterministic { first: base, second: again }.into());
    }

    let mut probe = store.clone();
    let mut report = FdReport {
        max_relative_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for index in 0..store.len() {
        let id = ParamId(index);
        for i in 0..store.get(id).len() {
            let original = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = original + h;
            let plus = evaluate(&f, &probe)?;
            probe.get_mut(id).data_mut()[i] = original - h;
            let minus = evaluate(&f, &probe)?;
            probe.get_mut(id).data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic.get(id).data()[i] - numeric).abs() / numeric.abs().max(1.0);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((store.name(id).to_string(), i));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use std::cell::Cell;

    fn single(name: &str, values: Vec<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(name, Tensor::row(values)).unwrap();
        s
    }

    #[test]
    fn square_is_exact_enough() {
        let store = single("x", vec![3.0]);
        let report = finite_diff_check(&store, 1e-5, |tape: &Tape, s: &ParamStore| {
            let x = tape.param(s, ParamId(0));
            let sq = tape.mul(x, x)?;
            tape.sum(sq)
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let store = single("x", vec![1.0, 2.0]);
        let report = finite_diff_check(&store, 1e-5, |tape: &Tape, s: &ParamStore| {
            let _x = tape.param(s, ParamId(0));
            let c = tape.constant(Tensor::scalar(4.0));
            tape.sum(c)
        })
        .unwrap();
        assert_eq!(report.max_relative_error, 0.0);
        assert_eq!(report.entries_checked, 2);
    }

    #[test]
    fn non_deterministic_function_is_diagnosed() {
        let store = single("x", vec![1.0]);
        let calls = Cell::new(0.0);
        let result = finite_diff_check(&store, 1e-5, |tape: &Tape, s: &ParamStore| {
            calls.set(calls.get() + 1.0);
            let x = tape.param(s, ParamId(0));
            let c = tape.constant(Tensor::scalar(calls.get()));
            let y = tape.mul(x, c)?;
            tape.sum(y)
        });
        assert!(matches!(result, Err(TensorError::NonDeterministic { .. })));
    }

    #[test]
    fn rejects_out_of_range_step() {
        let store = single("x", vec![1.0]);
        let f = |tape: &Tape, s: &ParamStore| tape.sum(tape.param(s, ParamId(0)));
        assert!(matches!(finite_diff_check(&store, 0.1, f), Err(TensorError::InvalidStep(_))));
        assert!(matches!(finite_diff_check(&store, 0.0, f), Err(TensorError::InvalidStep(_))));
    }
}
