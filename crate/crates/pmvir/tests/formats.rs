use pmvir::formats::ply::{self, Encoding, PlyMesh};
use pmvir::formats::{obj, pfm, read_mesh};
use pmvir_core::image::Plane;
use pmvir_core::synth::icosphere;
use pmvir_core::Vec3;
use proptest::prelude::*;

fn plane_strategy() -> impl Strategy<Value = Plane> {
    (1usize..9, 1usize..9, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
        let c = if rgb { 3 } else { 1 };
        prop::collection::vec(prop::num::f32::ANY, w * h * c)
            .prop_map(move |d| Plane::from_data(w, h, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn pfm_round_trip_is_bit_exact(p in plane_strategy()) {
        let back = pfm::decode(&pfm::encode(&p).unwrap()).unwrap();
        prop_assert_eq!(back.dims(), p.dims());
        let bits = |q: &Plane| q.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&p));
    }

    #[test]
    fn ply_round_trip(seed in 0u64..1000, enc in prop::sample::select(vec![Encoding::Ascii, Encoding::BinaryLittleEndian, Encoding::BinaryBigEndian])) {
        let mut m = PlyMesh::from_mesh(&icosphere(1, 1.0));
        let f = seed as f64;
        for (i, p) in m.positions.iter_mut().enumerate() {
            *p = *p * (1.0 + 1e-3 * f) + Vec3::new(1.0 / 3.0, -f, i as f64 * 1e-17);
        }
        m.albedo = Some((0..m.positions.len()).map(|i| [0.1 * i as f64, 1.0 / 3.0, f]).collect());
        m.quality = Some((0..m.positions.len()).map(|i| i as f64 / 7.0).collect());
        let back = ply::decode(&ply::encode(&m, enc).unwrap()).unwrap();
        prop_assert_eq!(&back.positions, &m.positions);
        prop_assert_eq!(&back.faces, &m.faces);
        let f32_round = |v: &f64| *v as f32 as f64;
        let want: Vec<[f64; 3]> = m.albedo.as_ref().unwrap().iter().map(|a| a.map(|v| f32_round(&v))).collect();
        prop_assert_eq!(back.albedo.unwrap(), want);
        let want_q: Vec<f64> = m.quality.as_ref().unwrap().iter().map(f32_round).collect();
        prop_assert_eq!(back.quality.unwrap(), want_q);
    }
}

#[test]
fn ascii_and_binary_agree() {
    let m = PlyMesh::from_mesh(&icosphere(2, 0.7));
    let a = ply::decode(&ply::encode(&m, Encoding::Ascii).unwrap()).unwrap();
    let b = ply::decode(&ply::encode(&m, Encoding::BinaryLittleEndian).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn writing_is_deterministic() {
    let m = PlyMesh::from_mesh(&icosphere(2, 1.0));
    for enc in [Encoding::Ascii, Encoding::BinaryLittleEndian] {
        assert_eq!(ply::encode(&m, enc).unwrap(), ply::encode(&m, enc).unwrap());
    }
}

#[test]
fn obj_and_ply_load_the_same_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = icosphere(1, 1.0);
    let mut text = String::new();
    for p in &mesh.positions {
        text += &format!("v {:?} {:?} {:?}\n", p.x, p.y, p.z);
    }
    for f in mesh.faces() {
        text += &format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    let obj_path = dir.path().join("m.obj");
    std::fs::write(&obj_path, text).unwrap();
    let ply_path = dir.path().join("m.ply");
    ply::write_mesh(&ply_path, &mesh, Encoding::BinaryLittleEndian).unwrap();
    let (a, b) = (read_mesh(&obj_path).unwrap(), read_mesh(&ply_path).unwrap());
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.faces(), b.faces());
    assert_eq!(obj::read(&obj_path).unwrap().faces, b.faces().to_vec());
}

#[test]
fn missing_and_broken_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.pfm");
    assert_eq!(pfm::read(&missing).unwrap_err().exit_code(), 3);
    let broken = dir.path().join("broken.ply");
    std::fs::write(&broken, b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1\n").unwrap();
    assert_eq!(ply::read(&broken).unwrap_err().exit_code(), 3);
}
