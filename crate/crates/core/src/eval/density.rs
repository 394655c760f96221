use crate::distance::euclidean;
use crate::error::{Error, Result};
use crate::features::{is_junk, mean_of_rows, FeatureSet};

/// Identity density: the mean over identities of the mean Euclidean
/// distance between each normalized sample and its identity center (the
/// un-normalized mean of the identity's normalized samples). Lower is
/// denser. Negative ids are ignored.
pub fn id2(set: &FeatureSet) -> Result<f64> {
    id2_with(set, is_junk)
}

pub(crate) fn id2_with(set: &FeatureSet, junk: impl Fn(i64) -> bool) -> Result<f64> {
    let set = set.normalized_cow()?;
    let groups: Vec<Vec<usize>> = set
        .indices_by_id()
        .into_iter()
        .filter(|(id, _)| !junk(*id))
        .map(|(_, members)| members)
        .collect();
    if groups.is_empty() {
        return Err(Error::EmptySet);
    }
    let total: f64 = groups
        .iter()
        .map(|members| {
            let center = mean_of_rows(&set, members);
            members
                .iter()
                .map(|&i| euclidean(set.row(i), &center))
                .sum::<f64>()
                / members.len() as f64
        })
        .sum();
    Ok(total / groups.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapsed_identities_have_zero_density() {
        let s = FeatureSet::from_rows(
            &[vec![0.6, 0.8], vec![0.6, 0.8], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(id2(&s).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_pair() {
        let s = FeatureSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![3, 3]).unwrap();
        assert!((id2(&s).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn raw_rows_are_normalized_first() {
        let s = FeatureSet::from_rows(&[vec![5.0, 0.0], vec![0.0, 0.1]], vec![3, 3]).unwrap();
        assert!((id2(&s).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identities_weighted_equally() {
        // id 0: distance √0.5 per sample; id 1: a single sample, distance 0
        let s = FeatureSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]], vec![0, 0, 1]).unwrap();
        assert!((id2(&s).unwrap() - 0.5f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn junk_only_is_empty() {
        let s = FeatureSet::from_rows(&[vec![1.0, 0.0]], vec![-1]).unwrap();
        assert!(matches!(id2(&s), Err(Error::EmptySet)));
    }
}
