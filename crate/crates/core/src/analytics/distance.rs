//! Character-level Levenshtein distance and the deletion/insertion lengths
//! of a minimal alignment.

/// Unit-cost Levenshtein distance over Unicode scalar values, and the same
/// distance divided by the longer length (0 when both are empty).
pub fn edit_distance(a: &str, b: &str) -> (usize, f64) {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let d = levenshtein(&a, &b);
    (d, normalize(d, a.len(), b.len()))
}

pub fn normalize(distance: usize, len_a: usize, len_b: usize) -> f64 {
    let longest = len_a.max(len_b);
    if longest == 0 {
        0.0
    } else {
        distance as f64 / longest as f64
    }
}

/// Two-row dynamic program.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Walk back through a minimal alignment of `original` into `revised` and
/// count removed and added characters. A substitution counts once on each
/// side. When several steps are optimal the walk prefers match, then
/// substitution, then deletion, then insertion.
pub fn diff_lengths(original: &str, revised: &str) -> (usize, usize) {
    let a: Vec<char> = original.chars().collect();
    let b: Vec<char> = revised.chars().collect();
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for (j, c) in cost[..width].iter_mut().enumerate() {
        *c = j;
    }
    for i in 1..=n {
        cost[i * width] = i;
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let up = cost[(i - 1) * width + j] + 1;
            let left = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(up).min(left);
        }
    }
    let (mut i, mut j) = (n, m);
    let (mut deleted, mut inserted) = (0, 0);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        let step = if i > 0 && j > 0 && a[i - 1] == b[j - 1] && cost[(i - 1) * width + j - 1] == here {
            Step::Match
        } else if i > 0 && j > 0 && cost[(i - 1) * width + j - 1] + 1 == here {
            Step::Substitute
        } else if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            Step::Delete
        } else {
            Step::Insert
        };
        match step {
            Step::Match => {
                i -= 1;
                j -= 1;
            }
            Step::Substitute => {
                deleted += 1;
                inserted += 1;
                i -= 1;
                j -= 1;
            }
            Step::Delete => {
                deleted += 1;
                i -= 1;
            }
            Step::Insert => {
                inserted += 1;
                j -= 1;
            }
        }
    }
    (deleted, inserted)
}
