use std::cell::RefCell;
use std::ops::{Deref, DerefMut};

/// `c = a * b` for row-major `a: m x k`, `b: k x n`, `c: m x n`, all `f64`.
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.fill(0.0);
        return;
    }
    // SAFETY: the slices have exactly the extents described by the
    // dimensions and row strides passed here (checked above in debug builds,
    // and by construction at every call site).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// Zeroed `f64` buffer borrowed from a per-thread pool and returned on drop.
/// Reusing buffers avoids faulting in fresh pages for every large call.
pub(crate) struct Scratch(Vec<f64>);

impl Scratch {
    pub(crate) fn zeroed(len: usize) -> Self {
        let mut v = POOL.with(|p| p.borrow_mut().pop()).unwrap_or_default();
        v.clear();
        v.resize(len, 0.0);
        Scratch(v)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let v = std::mem::take(&mut self.0);
        POOL.with(|p| {
            let mut p = p.borrow_mut();
            if p.len() < 8 {
                p.push(v);
            }
        });
    }
}

impl Deref for Scratch {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Scratch {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn widen(src: &[f32]) -> Scratch {
    let mut out = Scratch::zeroed(src.len());
    for (d, &s) in out.iter_mut().zip(src) {
        *d = s as f64;
    }
    out
}
