//! Average-linkage agglomerative clustering on 1 − |r|.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::CorrMatrix;
use crate::error::{Error, Result};

/// Where to cut the merge tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Keep merges strictly below this height.
    Height(f64),
    /// Stop once this many groups remain.
    Groups(usize),
}

/// One agglomeration step. Nodes `0..n` are leaves in sorted-id order;
/// the merge at position `i` creates node `n + i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterGrouping {
    /// Leaf labels, sorted.
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
    /// Flat groups at the cut, each sorted, ordered by first member.
    pub groups: Vec<Vec<String>>,
}

struct Active {
    node: usize,
    members: Vec<usize>,
}

/// Builds the average-linkage tree over distance 1 − |r| and cuts it.
/// Equal distances are broken by the lexicographically smallest pair of
/// cluster representatives, so the result does not depend on input order.
pub fn hierarchical_cluster(c: &CorrMatrix, cut: Cut) -> Result<ClusterGrouping> {
    let p = c.dim();
    if p == 0 {
        return Err(Error::InvalidInput("nothing to cluster".into()));
    }
    let undefined = c.undefined_ids();
    if !undefined.is_empty() {
        return Err(Error::UndefinedCorrelation(format!("entries for {}", undefined.join(", "))));
    }
    match cut {
        Cut::Groups(g) if g == 0 || g > p => {
            return Err(Error::InvalidArgument(format!("cannot cut {p} items into {g} groups")));
        }
        Cut::Height(h) if h.is_nan() => return Err(Error::InvalidArgument("cut height is NaN".into())),
        _ => {}
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| c.ids()[a].cmp(&c.ids()[b]));
    let leaves: Vec<String> = order.iter().map(|&i| c.ids()[i].clone()).collect();

    // dist[a][b] over active slots; slots are reused by the merged cluster
    let mut dist: Vec<Vec<f64>> = (0..p)
        .map(|a| {
            (0..p)
                .map(|b| 1.0 - c.get(order[a], order[b]).unwrap_or_default().abs())
                .collect()
        })
        .collect();
    let mut active: Vec<Option<Active>> = (0..p)
        .map(|i| {
            Some(Active {
                node: i,
                members: vec![i],
            })
        })
        .collect();
    let mut merges = Vec::with_capacity(p.saturating_sub(1));
    for step in 0..p.saturating_sub(1) {
        // slots are in order of their smallest member, so scanning a < b
        // visits candidate pairs in lexicographic representative order
        let mut slots: Vec<usize> = (0..p).filter(|&s| active[s].is_some()).collect();
        slots.sort_by_key(|&s| active[s].as_ref().map(|a| a.members[0]));
        let mut best: Option<(f64, usize, usize)> = None;
        for (ia, &a) in slots.iter().enumerate() {
            for &b in &slots[ia + 1..] {
                let d = dist[a][b];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        let ca = active[a].take().expect("active");
        let cb = active[b].take().expect("active");
        let (na, nb) = (ca.members.len() as f64, cb.members.len() as f64);
        for s in 0..p {
            if active[s].is_some() {
                let d = (na * dist[a][s] + nb * dist[b][s]) / (na + nb);
                dist[a][s] = d;
                dist[s][a] = d;
            }
        }
        let mut members = ca.members;
        members.extend(cb.members);
        members.sort_unstable();
        merges.push(Merge {
            left: ca.node,
            right: cb.node,
            height: height.max(0.0),
            size: members.len(),
        });
        active[a] = Some(Active { node: p + step, members });
    }

    let applied = match cut {
        Cut::Height(h) => merges.iter().take_while(|m| m.height < h).count(),
        Cut::Groups(g) => p - g,
    };
    // Average-linkage heights never decrease, so a height cut is a prefix.
    let mut parent: Vec<usize> = (0..p + merges.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, m) in merges.iter().take(applied).enumerate() {
        let node = p + i;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = node;
        parent[r] = node;
    }
    let mut by_root: Vec<(usize, Vec<usize>)> = Vec::new();
    for leaf in 0..p {
        let root = find(&mut parent, leaf);
        match by_root.iter_mut().find(|(r, _)| *r == root) {
            Some((_, v)) => v.push(leaf),
            None => by_root.push((root, vec![leaf])),
        }
    }
    let groups = by_root
        .into_iter()
        .map(|(_, v)| v.into_iter().map(|i| leaves[i].clone()).collect())
        .collect();
    Ok(ClusterGrouping { leaves, merges, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::CorrMethod;

    fn corr(ids: &[&str], r: &[f64]) -> CorrMatrix {
        CorrMatrix::new(
            ids.iter().map(|s| String::from(*s)).collect(),
            r.iter().map(|&v| Some(v)).collect(),
            CorrMethod::Pearson,
        )
        .unwrap()
    }

    #[test]
    fn identical_pair_merges_first_at_zero() {
        let c = corr(&["a", "b", "c"], &[1.0, 1.0, 0.2, 1.0, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let g = hierarchical_cluster(&c, Cut::Groups(1)).unwrap();
        assert_eq!((g.merges[0].left, g.merges[0].right), (0, 1));
        assert_eq!(g.merges[0].height, 0.0);
        assert!((g.merges[1].height - 0.75).abs() < 1e-15);
        let singles = hierarchical_cluster(&c, Cut::Height(0.0)).unwrap();
        assert_eq!(singles.groups.len(), 3);
    }

    #[test]
    fn block_structure_recovered() {
        let ids = ["a1", "a2", "a3", "b1", "b2", "b3"];
        let mut r = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                r[i * 6 + j] = if i == j { 1.0 } else if (i < 3) == (j < 3) { 0.9 } else { 0.0 };
            }
        }
        let g = hierarchical_cluster(&corr(&ids, &r), Cut::Groups(2)).unwrap();
        let want: Vec<Vec<String>> = vec![
            ids[..3].iter().map(|s| String::from(*s)).collect(),
            ids[3..].iter().map(|s| String::from(*s)).collect(),
        ];
        assert_eq!(g.groups, want);
        assert!(g.merges.windows(2).all(|w| w[0].height <= w[1].height));
    }

    #[test]
    fn undefined_entries_rejected() {
        let c = CorrMatrix::new(
            vec!["a".into(), "b".into()],
            vec![Some(1.0), None, None, Some(1.0)],
            CorrMethod::Spearman,
        )
        .unwrap();
        assert!(matches!(
            hierarchical_cluster(&c, Cut::Groups(1)),
            Err(Error::UndefinedCorrelation(_))
        ));
    }
}
