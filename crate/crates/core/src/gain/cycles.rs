/// Every index subset of `{0..n}` with `2 <= |S| <= n`, ordered by size and
/// then lexicographically.
pub fn subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for p in 2..=n {
        let mut cur = Vec::with_capacity(p);
        combine(n, p, 0, &mut cur, &mut out);
    }
    out
}

fn combine(n: usize, p: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == p {
        out.push(cur.clone());
        return;
    }
    for k in from..n {
        cur.push(k);
        combine(n, p, k + 1, cur, out);
        cur.pop();
    }
}

/// Directed simple cycles of length `2..=n` in the complete digraph on `n`
/// nodes, one per rotation class.
///
/// Each cycle starts at its smallest node. Output is ordered by length and then
/// lexicographically, so for `n = 3` it reads `[0,1] [0,2] [1,2] [0,1,2] [0,2,1]`.
pub fn simple_cycles(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for p in 2..=n {
        let mut level = Vec::new();
        for start in 0..n {
            let mut path = vec![start];
            let mut used = vec![false; n];
            used[start] = true;
            extend(n, p, &mut path, &mut used, &mut level);
        }
        level.sort();
        out.extend(level);
    }
    out
}

fn extend(n: usize, p: usize, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if path.len() == p {
        out.push(path.clone());
        return;
    }
    for k in path[0] + 1..n {
        if !used[k] {
            used[k] = true;
            path.push(k);
            extend(n, p, path, used, out);
            path.pop();
            used[k] = false;
        }
    }
}
