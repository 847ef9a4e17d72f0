use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Dense coefficient layout for jets of a given dimension and order.
///
/// Multi-indices are stored degree by degree, lexicographically inside each
/// degree. The ordering of a degree layer does not depend on the order, so the
/// layout of order `k - 1` is a prefix of the layout of order `k` and
/// truncation is a slice.
#[derive(Debug)]
pub(crate) struct JetLayout {
    pub dim: usize,
    pub order: usize,
    pub exponents: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(lhs, rhs, out)` for every pair whose total degree fits in `order`.
    pub products: Vec<(u32, u32, u32)>,
    /// Per coordinate: `(src, dst, factor)` with `dst` indexing the order-1 layout.
    pub partials: Vec<Vec<(u32, u32, f64)>>,
}

fn push_degree(dim: usize, degree: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() + 1 == dim {
        prefix.push(degree as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=degree).rev() {
        prefix.push(first as u8);
        push_degree(dim, degree - first, prefix, out);
        prefix.pop();
    }
}

impl JetLayout {
    fn build(dim: usize, order: usize) -> Self {
        assert!(dim >= 1, "jets need at least one coordinate");
        let mut exponents = Vec::new();
        for degree in 0..=order {
            push_degree(dim, degree, &mut Vec::with_capacity(dim), &mut exponents);
        }
        let lookup: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            let da = degree(a);
            for (j, b) in exponents.iter().enumerate() {
                if da + degree(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }

        let mut partials = vec![Vec::new(); dim];
        for (m, table) in partials.iter_mut().enumerate() {
            for (src, e) in exponents.iter().enumerate() {
                if e[m] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[m] -= 1;
                table.push((src as u32, lookup[&lowered] as u32, e[m] as f64));
            }
        }

        Self {
            dim,
            order,
            exponents,
            lookup,
            products,
            partials,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.lookup.get(exponents).copied()
    }

    /// Shared layout for `(dim, order)`.
    pub fn get(dim: usize, order: usize) -> Arc<JetLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((dim, order))
            .or_insert_with(|| Arc::new(JetLayout::build(dim, order)))
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_sizes_are_binomial() {
        // C(D + K, K)
        assert_eq!(JetLayout::get(4, 3).len(), 35);
        assert_eq!(JetLayout::get(8, 3).len(), 165);
        assert_eq!(JetLayout::get(1, 5).len(), 6);
    }

    #[test]
    fn lower_order_is_prefix() {
        let hi = JetLayout::get(3, 4);
        let lo = JetLayout::get(3, 2);
        assert_eq!(&hi.exponents[..lo.len()], &lo.exponents[..]);
        assert!(
            hi.exponents[lo.len()]
                .iter()
                .map(|&e| e as usize)
                .sum::<usize>()
                == 3
        );
    }
}
