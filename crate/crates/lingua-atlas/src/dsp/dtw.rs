//! Dynamic time warping over a pairwise local-cost function.
//!
//! Paths run from (0, 0) to (na-1, nb-1) with steps (1, 0), (0, 1), (1, 1);
//! every visited cell contributes its local cost once. Among minimum-cost
//! paths the shortest is selected, which makes the mean alignment cost — and
//! therefore MCD — symmetric under swapping the two sequences.

/// Minimum path cost and the length of the shortest minimum-cost path.
pub fn align_cost(na: usize, nb: usize, cost: impl Fn(usize, usize) -> f64) -> (f64, usize) {
    assert!(na > 0 && nb > 0, "dtw inputs must be non-empty");
    let mut prev: Vec<(f64, usize)> = vec![(0.0, 0); nb];
    let mut cur: Vec<(f64, usize)> = vec![(0.0, 0); nb];
    for i in 0..na {
        for j in 0..nb {
            let local = cost(i, j);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best: Option<(f64, usize)> = None;
                if i > 0 {
                    best = Some(pick(best, prev[j]));
                }
                if j > 0 {
                    best = Some(pick(best, cur[j - 1]));
                }
                if i > 0 && j > 0 {
                    best = Some(pick(best, prev[j - 1]));
                }
                best.unwrap()
            };
            cur[j] = (best.0 + local, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[nb - 1]
}

fn pick(best: Option<(f64, usize)>, candidate: (f64, usize)) -> (f64, usize) {
    match best {
        None => candidate,
        Some(b) => {
            if candidate.0 < b.0 || (candidate.0 == b.0 && candidate.1 < b.1) {
                candidate
            } else {
                b
            }
        }
    }
}

type PathChoice = ((usize, usize), (f64, usize));

/// Full alignment path for inspection. Same cost/length optimum as
/// [`align_cost`]; ties in the backtrack prefer the diagonal step.
pub fn align_path(
    na: usize,
    nb: usize,
    cost: impl Fn(usize, usize) -> f64,
) -> (Vec<(usize, usize)>, f64) {
    assert!(na > 0 && nb > 0, "dtw inputs must be non-empty");
    let idx = |i: usize, j: usize| i * nb + j;
    let mut table: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); na * nb];
    for i in 0..na {
        for j in 0..nb {
            let local = cost(i, j);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best: Option<(f64, usize)> = None;
                if i > 0 {
                    best = Some(pick(best, table[idx(i - 1, j)]));
                }
                if j > 0 {
                    best = Some(pick(best, table[idx(i, j - 1)]));
                }
                if i > 0 && j > 0 {
                    best = Some(pick(best, table[idx(i - 1, j - 1)]));
                }
                best.unwrap()
            };
            table[idx(i, j)] = (best.0 + local, best.1 + 1);
        }
    }

    let mut path = Vec::new();
    let (mut i, mut j) = (na - 1, nb - 1);
    loop {
        path.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        let mut best: Option<PathChoice> = None;
        let consider = |pi: usize, pj: usize, best: &mut Option<PathChoice>| {
            let cand = table[idx(pi, pj)];
            let replace = match best {
                None => true,
                Some((_, b)) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
            };
            if replace {
                *best = Some(((pi, pj), cand));
            }
        };
        // Diagonal first so exact ties stay on the diagonal.
        if i > 0 && j > 0 {
            consider(i - 1, j - 1, &mut best);
        }
        if i > 0 {
            consider(i - 1, j, &mut best);
        }
        if j > 0 {
            consider(i, j - 1, &mut best);
        }
        let ((pi, pj), _) = best.unwrap();
        i = pi;
        j = pj;
    }
    path.reverse();
    (path, table[idx(na - 1, nb - 1)].0)
}
