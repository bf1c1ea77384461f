use crate::belief::GaussianBelief;
use crate::metric::MetricKind;

use super::index::BeliefIndex;
use super::tree::Tree;

/// Active node nearest to `sample`; ties go to the lowest id.
pub fn rrt_select(tree: &Tree, active: &BeliefIndex, sample: &GaussianBelief, metric: MetricKind) -> usize {
    active
        .nearest(sample, metric, |i| tree.belief(i))
        .map(|(id, _)| id)
        .expect("the root is always active")
}

/// Cheapest active node within `radius` of `sample`, or the nearest one when none is.
pub fn sst_select(
    tree: &Tree,
    active: &BeliefIndex,
    sample: &GaussianBelief,
    metric: MetricKind,
    radius: f64,
) -> usize {
    active
        .within(sample, radius, metric, |i| tree.belief(i))
        .into_iter()
        .map(|(id, _)| (tree.node(id).cost, id))
        .reduce(|a, b| if super::index::better(b, a) { b } else { a })
        .map(|(_, id)| id)
        .unwrap_or_else(|| rrt_select(tree, active, sample, metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::planner::index::NearestSearch;
    use crate::planner::tree::EdgeControls;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_belief(rng: &mut ChaCha8Rng) -> GaussianBelief {
        let mean = DVector::from_fn(2, |_, _| rng.random::<f64>() * 30.0);
        let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        GaussianBelief::from_covariance(mean, &g * g.transpose()).unwrap()
    }

    /// A tree with 100 nodes under random parents, costs rounded so that ties happen.
    fn random_tree(rng: &mut ChaCha8Rng, kind: NearestSearch) -> (Tree, BeliefIndex) {
        let bounds = Aabb::new(vec![0.0, 0.0], vec![30.0, 30.0]).unwrap();
        let mut tree = Tree::new(random_belief(rng));
        let mut index = BeliefIndex::new(kind, &bounds, 3.0);
        index.insert(0, tree.belief(0));
        for _ in 0..100 {
            let parent = rng.random_range(0..tree.capacity());
            let edge = EdgeControls { control: DVector::zeros(2), steps: 1 };
            let id = tree.add(parent, random_belief(rng), edge, rng.random_range(0..4) as f64);
            index.insert(id, tree.belief(id));
        }
        (tree, index)
    }

    fn brute_nearest(tree: &Tree, sample: &GaussianBelief, metric: MetricKind) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for id in tree.active_ids() {
            let d = metric.distance(tree.belief(id), sample);
            if d < best.0 || (d == best.0 && id < best.1) {
                best = (d, id);
            }
        }
        best.1
    }

    fn brute_best_near(tree: &Tree, sample: &GaussianBelief, metric: MetricKind, radius: f64) -> usize {
        let mut best: Option<(f64, usize)> = None;
        for id in tree.active_ids() {
            if metric.distance(tree.belief(id), sample) <= radius {
                let c = tree.node(id).cost;
                if best.is_none_or(|(bc, bid)| c < bc || (c == bc && id < bid)) {
                    best = Some((c, id));
                }
            }
        }
        best.map_or_else(|| brute_nearest(tree, sample, metric), |(_, id)| id)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn selection_matches_brute_force(seed in any::<u64>(), radius in 0.5f64..60.0, grid in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = if grid { NearestSearch::Grid } else { NearestSearch::Linear };
            let (tree, index) = random_tree(&mut rng, kind);
            for _ in 0..20 {
                let sample = random_belief(&mut rng);
                for metric in [MetricKind::Wasserstein2, MetricKind::EuclideanMean] {
                    prop_assert_eq!(rrt_select(&tree, &index, &sample, metric), brute_nearest(&tree, &sample, metric));
                    prop_assert_eq!(
                        sst_select(&tree, &index, &sample, metric, radius),
                        brute_best_near(&tree, &sample, metric, radius)
                    );
                }
            }
        }
    }

    #[test]
    fn empty_neighbourhood_falls_back_to_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (tree, index) = random_tree(&mut rng, NearestSearch::Grid);
        let far = GaussianBelief::from_covariance(DVector::from_vec(vec![500.0, 500.0]), DMatrix::identity(2, 2)).unwrap();
        let m = MetricKind::Wasserstein2;
        assert_eq!(sst_select(&tree, &index, &far, m, 1.0), rrt_select(&tree, &index, &far, m));
    }
}
