//! Small permutation helpers shared by the model and the encoder.

/// Rearranges `xs` into the next permutation in lexicographic order.
///
/// Returns `false` (leaving `xs` sorted ascending) once the last permutation
/// has been passed.
pub fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        xs.reverse();
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    while next_permutation(&mut current) {
        out.push(current.clone());
    }
    out
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Checks that `xs` is a permutation of `0..xs.len()`.
pub fn is_permutation(xs: &[usize]) -> bool {
    let mut seen = vec![false; xs.len()];
    for &x in xs {
        if x >= xs.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

pub fn inverse(xs: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order_n3() {
        let perms = permutations(3);
        assert_eq!(
            perms,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0],
            ]
        );
    }

    #[test]
    fn counts_match_factorial() {
        for n in 0..=6 {
            assert_eq!(permutations(n).len() as u64, factorial(n).max(1));
        }
    }

    #[test]
    fn inverse_roundtrip() {
        for p in permutations(4) {
            let inv = inverse(&p);
            for i in 0..4 {
                assert_eq!(inv[p[i]], i);
            }
        }
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(!is_permutation(&[0, 0]));
        assert!(!is_permutation(&[1, 2]));
        assert!(is_permutation(&[1, 0]));
        assert!(is_permutation(&[]));
    }
}
