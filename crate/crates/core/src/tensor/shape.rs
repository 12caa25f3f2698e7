use crate::error::{Error, Result};

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * shape[i + 1];
    }
    out
}

pub(crate) fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    assert_eq!(shape.len(), index.len(), "index rank mismatch");
    let mut flat = 0;
    for (&dim, &i) in shape.iter().zip(index) {
        assert!(i < dim, "index {index:?} out of bounds for {shape:?}");
        flat = flat * dim + i;
    }
    flat
}

/// Result shape of a size-one-axis broadcast; ranks must agree.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::shapes("broadcast", a, b));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => Err(Error::shapes("broadcast", a, b)),
        })
        .collect()
}

/// Strides of `shape` viewed inside `out`, zero on broadcast axes.
pub(crate) fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let base = strides(shape);
    shape
        .iter()
        .zip(out)
        .zip(base)
        .map(|((&s, &o), st)| if s == 1 && o != 1 { 0 } else { st })
        .collect()
}

/// Calls `f(out_flat, a_flat, b_flat)` for every output element.
pub(crate) fn for_each_broadcast(
    out: &[usize],
    a_strides: &[usize],
    b_strides: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let rank = out.len();
    let total = numel(out);
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    for flat in 0..total {
        f(flat, ia, ib);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            ia += a_strides[ax];
            ib += b_strides[ax];
            if idx[ax] < out[ax] {
                break;
            }
            ia -= a_strides[ax] * out[ax];
            ib -= b_strides[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}
