use avatarback_core::geometry::{camera_from_orbit, mesh_eval, MeshParams, ParametricMesh, SimilarityTransform};
use avatarback_core::metrics::{fid, ssim, FeatureSet};
use avatarback_core::splat::{bind_kernels, globalize, render, RenderOptions};
use avatarback_core::Vec3;
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_render(c: &mut Criterion) {
    let mesh = ParametricMesh::bundled_head();
    let phi = MeshParams::zeros(mesh.num_params());
    let verts = mesh_eval(&mesh, &phi).unwrap();
    let cloud = bind_kernels(&verts, &mesh.triangles, 1).unwrap();
    let world = globalize(&cloud, &verts, &mesh.triangles, &SimilarityTransform::identity()).unwrap();
    let cam = camera_from_orbit(0.0, 0.0, 4.0, Vec3::zeros(), 26.0, (128, 128)).unwrap();
    c.bench_function("render_128", |b| {
        b.iter(|| render(&world, &cam, RenderOptions::default()))
    });
    let img = render(&world, &cam, RenderOptions::default());
    c.bench_function("ssim_128", |b| b.iter(|| ssim(&img, &img).unwrap()));
}

fn bench_fid(c: &mut Criterion) {
    let rows: Vec<Vec<f64>> = (0..256)
        .map(|i| (0..32).map(|j| ((i * 31 + j * 7) % 17) as f64).collect())
        .collect();
    let a = FeatureSet::from_rows(&rows, "a").unwrap();
    c.bench_function("fid_256x32", |b| b.iter(|| fid(&a, &a).unwrap()));
}

criterion_group!(benches, bench_render, bench_fid);
criterion_main!(benches);
