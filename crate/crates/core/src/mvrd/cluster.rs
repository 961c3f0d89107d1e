use crate::error::{Error, Result};
use crate::ndmath::{euclidean, Matrix};

/// Result of label-seeded clustering with a single refinement pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    /// `K x d`, recomputed from all nodes under their pseudo-labels.
    pub centers: Matrix,
    pub pseudo_labels: Vec<usize>,
    /// Distance of each node to the center of its pseudo-class.
    pub center_distance: Vec<f64>,
    /// Classes without labelled nodes; their seed center was the global
    /// labelled mean.
    pub empty_classes: Vec<usize>,
}

/// Seeds one center per class from the labelled nodes, assigns every node to
/// its nearest seed (ties to the lowest class), then recomputes the centers
/// once from all nodes.
///
/// `labelled` holds `(node, class)` pairs. A class that receives no node in
/// the assignment keeps its seed center.
pub fn semi_cluster(h: &Matrix, labelled: &[(usize, usize)], classes: usize) -> Result<ClusterState> {
    let (n, d) = h.shape();
    if labelled.is_empty() {
        return Err(Error::InvalidArgument("semi-supervised clustering needs labelled nodes".into()));
    }
    if classes == 0 {
        return Err(Error::InvalidArgument("class count must be positive".into()));
    }
    for &(i, k) in labelled {
        if i >= n {
            return Err(Error::NodeOutOfRange { index: i, n });
        }
        if k >= classes {
            return Err(Error::LabelOutOfRange { node: i, label: k, classes });
        }
    }

    let mut seeds = Matrix::zeros(classes, d);
    let mut counts = vec![0usize; classes];
    let mut global = vec![0.0; d];
    for &(i, k) in labelled {
        counts[k] += 1;
        for (c, &v) in h.row(i).iter().enumerate() {
            seeds[(k, c)] += v;
            global[c] += v;
        }
    }
    global.iter_mut().for_each(|g| *g /= labelled.len() as f64);
    let mut empty_classes = Vec::new();
    for k in 0..classes {
        if counts[k] == 0 {
            seeds.row_mut(k).copy_from_slice(&global);
            empty_classes.push(k);
        } else {
            let inv = 1.0 / counts[k] as f64;
            seeds.row_mut(k).iter_mut().for_each(|v| *v *= inv);
        }
    }

    let pseudo_labels: Vec<usize> = (0..n).map(|i| nearest(h.row(i), &seeds)).collect();

    let mut centers = Matrix::zeros(classes, d);
    let mut sizes = vec![0usize; classes];
    for (i, &k) in pseudo_labels.iter().enumerate() {
        sizes[k] += 1;
        for (c, v) in centers.row_mut(k).iter_mut().zip(h.row(i)) {
            *c += v;
        }
    }
    for k in 0..classes {
        if sizes[k] == 0 {
            centers.row_mut(k).copy_from_slice(seeds.row(k));
        } else {
            let inv = 1.0 / sizes[k] as f64;
            centers.row_mut(k).iter_mut().for_each(|v| *v *= inv);
        }
    }
    let center_distance = pseudo_labels.iter().enumerate().map(|(i, &k)| euclidean(h.row(i), centers.row(k))).collect();
    Ok(ClusterState { centers, pseudo_labels, center_distance, empty_classes })
}

fn nearest(x: &[f64], centers: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for k in 0..centers.rows() {
        let d: f64 = x.iter().zip(centers.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_seed_example() {
        let h = Matrix::from_rows(&[vec![0.0, 0.0], vec![10.0, 10.0], vec![1.0, 1.0]]).unwrap();
        let c = semi_cluster(&h, &[(0, 0), (1, 1)], 2).unwrap();
        assert_eq!(c.pseudo_labels, vec![0, 1, 0]);
        assert_eq!(c.centers.row(0), &[0.5, 0.5]);
        assert_eq!(c.centers.row(1), &[10.0, 10.0]);
        assert!(c.empty_classes.is_empty());
    }

    #[test]
    fn pseudo_labels_can_disagree_with_labels() {
        // node 2 is labelled 1 but sits on the class-0 side
        let h = Matrix::from_rows(&[vec![0.0], vec![10.0], vec![1.0], vec![9.0]]).unwrap();
        let c = semi_cluster(&h, &[(0, 0), (1, 1), (2, 1), (3, 1)], 2).unwrap();
        // seeds: c0 = 0, c1 = (10 + 1 + 9) / 3 = 6.67 -> node 2 goes to class 0
        assert_eq!(c.pseudo_labels, vec![0, 1, 0, 1]);
        assert_eq!(c.centers.row(0), &[0.5]);
        assert_eq!(c.centers.row(1), &[9.5]);
    }

    #[test]
    fn empty_class_falls_back_to_global_mean() {
        let h = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![100.0]]).unwrap();
        let c = semi_cluster(&h, &[(0, 0), (1, 0)], 2).unwrap();
        assert_eq!(c.empty_classes, vec![1]);
        // both seeds equal -> ties go to class 0 for everyone
        assert_eq!(c.pseudo_labels, vec![0, 0, 0]);
        assert_eq!(c.centers.row(1), &[1.0]);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let h = Matrix::from_rows(&[vec![-1.0], vec![1.0], vec![0.0]]).unwrap();
        let c = semi_cluster(&h, &[(0, 0), (1, 1)], 2).unwrap();
        assert_eq!(c.pseudo_labels[2], 0);
    }

    #[test]
    fn errors() {
        let h = Matrix::zeros(2, 1);
        assert!(semi_cluster(&h, &[], 2).is_err());
        assert!(semi_cluster(&h, &[(0, 3)], 2).is_err());
    }
}
