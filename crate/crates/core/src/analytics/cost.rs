use crate::error::{check_dim, param, Result};
use crate::geometry::PointCloud;
use crate::transport::squared_distance;

/// Mean over aligned tuples `(a, T_1 a, …, T_n a)` of
/// `(1 − Σ t_i)‖z − a‖² + Σ t_i ‖z − T_i a‖²`, where `z = (1 − Σ t_i) a + Σ t_i T_i a`.
pub fn pifm_transport_cost(source: &PointCloud, images: &[PointCloud], t: &[f64]) -> Result<f64> {
    check_dim(images.len(), t.len(), "transport cost parameter point")?;
    if source.is_empty() {
        return param("transport cost needs at least one tuple");
    }
    for img in images {
        if img.len() != source.len() {
            return param(format!(
                "transport cost tuples must align: source has {} points, image has {}",
                source.len(),
                img.len()
            ));
        }
        check_dim(source.dim(), img.dim(), "transport cost image")?;
    }
    let w0 = 1.0 - t.iter().sum::<f64>();
    let d = source.dim();
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..source.len() {
        let a = source.point(k);
        z.iter_mut().zip(a).for_each(|(zv, av)| *zv = w0 * av);
        for (img, &ti) in images.iter().zip(t) {
            z.iter_mut().zip(img.point(k)).for_each(|(zv, bv)| *zv += ti * bv);
        }
        let mut c = w0 * squared_distance(&z, a);
        for (img, &ti) in images.iter().zip(t) {
            c += ti * squared_distance(&z, img.point(k));
        }
        total += c;
    }
    Ok(total / source.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple() -> (PointCloud, Vec<PointCloud>) {
        let p = |v: [f64; 2]| PointCloud::from_points(&[v.to_vec()]).unwrap();
        (p([0.0, 0.0]), vec![p([1.0, 0.0]), p([0.0, 1.0])])
    }

    #[test]
    fn hand_values() {
        let (a, imgs) = tuple();
        assert_eq!(pifm_transport_cost(&a, &imgs, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(pifm_transport_cost(&a, &imgs, &[1.0, 0.0]).unwrap(), 0.0);
        assert!((pifm_transport_cost(&a, &imgs, &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn misaligned_is_error() {
        let (a, mut imgs) = tuple();
        imgs[1] = PointCloud::from_points(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(pifm_transport_cost(&a, &imgs, &[0.5, 0.5]).is_err());
    }
}
