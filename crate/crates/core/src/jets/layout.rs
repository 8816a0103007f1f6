//! Graded-lex monomial tables shared by all series with the same shape.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial enumeration for `nvars` variables up to total degree `order`.
///
/// Monomials are sorted by total degree, then lexicographically with the
/// first variable's exponent descending: for two variables and degree 2
/// the order is `1, a, b, a², ab, b²`.
#[derive(Debug)]
pub struct Layout {
    pub nvars: usize,
    pub order: usize,
    exps: Vec<u16>,
    degree_start: Vec<usize>,
    index: HashMap<Vec<u16>, usize>,
    products: Vec<Vec<u32>>,
    parents: Vec<(u32, u16)>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(exps.len() / nvars);
            let mut current = vec![0u16; nvars];
            push_degree(&mut exps, &mut current, 0, d);
        }
        let len = exps.len() / nvars;
        degree_start.push(len);
        let mut index = HashMap::with_capacity(len);
        for i in 0..len {
            index.insert(exps[i * nvars..(i + 1) * nvars].to_vec(), i);
        }
        let mut layout = Layout {
            nvars,
            order,
            exps,
            degree_start,
            index,
            products: Vec::new(),
            parents: Vec::new(),
        };
        let mut products = Vec::with_capacity(len);
        let mut buf = vec![0u16; nvars];
        for i in 0..len {
            let room = order - layout.degree(i);
            let n = layout.degree_start[room + 1];
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = layout.exponents(i)[k] + layout.exponents(j)[k];
                }
                row.push(layout.index[&buf] as u32);
            }
            products.push(row);
        }
        layout.products = products;
        let mut parents = vec![(0, 0)];
        for i in 1..len {
            buf.copy_from_slice(layout.exponents(i));
            let v = buf.iter().position(|&x| x > 0).expect("nonconstant");
            buf[v] -= 1;
            parents.push((layout.index[&buf] as u32, v as u16));
        }
        layout.parents = parents;
        layout
    }

    pub fn len(&self) -> usize {
        self.degree_start[self.order + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn exponents(&self, i: usize) -> &[u16] {
        &self.exps[i * self.nvars..(i + 1) * self.nvars]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.exponents(i).iter().map(|&e| e as usize).sum()
    }

    /// Number of monomials of total degree `<= d`.
    pub fn count_upto(&self, d: usize) -> usize {
        self.degree_start[d.min(self.order) + 1]
    }

    /// Index range of the monomials with total degree exactly `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    /// For `i > 0`, a monomial `(p, v)` with `mono(i) = mono(p) · var(v)`.
    #[inline]
    pub fn parent(&self, i: usize) -> (usize, usize) {
        let (p, v) = self.parents[i];
        (p as usize, v as usize)
    }

    pub fn index_of(&self, exps: &[u16]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// `products(i)[j]` is the index of monomial `i` times monomial `j`,
    /// defined for every `j` whose degree keeps the product within order.
    #[inline]
    pub fn products(&self, i: usize) -> &[u32] {
        &self.products[i]
    }
}

fn push_degree(exps: &mut Vec<u16>, current: &mut [u16], var: usize, remaining: usize) {
    let n = current.len();
    if var == n - 1 {
        current[var] = remaining as u16;
        exps.extend_from_slice(current);
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u16;
        push_degree(exps, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// Shared layout for the given shape; built once per process.
///
/// Panics if `nvars` is zero.
pub fn layout(nvars: usize, order: usize) -> Arc<Layout> {
    assert!(nvars > 0, "a series needs at least one variable");
    type Cache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(l) = cache.lock().expect("layout cache poisoned").get(&(nvars, order)) {
        return l.clone();
    }
    let built = Arc::new(Layout::build(nvars, order));
    cache
        .lock()
        .expect("layout cache poisoned")
        .entry((nvars, order))
        .or_insert(built)
        .clone()
}
