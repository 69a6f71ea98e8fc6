use fmapkit::cache::{decode, encode, list_entries, mesh_hash, BasisCache, CacheStatus};
use fmapkit_core::mesh::build_laplacian;
use fmapkit_core::shapes;
use fmapkit_core::spectral::compute_basis;

#[test]
fn cached_basis_equals_fresh_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BasisCache::new(dir.path());
    let mesh = shapes::icosphere(2);
    let (computed, status) = cache.basis(&mesh, 12).unwrap();
    assert_eq!(status, CacheStatus::Computed);
    let (loaded, status) = cache.basis(&mesh, 12).unwrap();
    assert_eq!(status, CacheStatus::Hit);
    assert_eq!(loaded, computed);
    let fresh = compute_basis(&build_laplacian(&mesh).unwrap(), 12).unwrap();
    assert_eq!(loaded, fresh);
}

#[test]
fn rerun_does_not_touch_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BasisCache::new(dir.path());
    let mesh = shapes::icosphere(1);
    cache.basis(&mesh, 8).unwrap();
    let entries = list_entries(dir.path()).unwrap();
    assert_eq!(entries.len(), 1);
    let before = std::fs::metadata(&entries[0]).unwrap().modified().unwrap();
    let bytes = std::fs::read(&entries[0]).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    assert_eq!(cache.basis(&mesh, 8).unwrap().1, CacheStatus::Hit);
    assert_eq!(std::fs::metadata(&entries[0]).unwrap().modified().unwrap(), before);
    assert_eq!(std::fs::read(&entries[0]).unwrap(), bytes);
    assert_eq!(list_entries(dir.path()).unwrap(), entries);
}

#[test]
fn distinct_meshes_and_sizes_get_distinct_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BasisCache::new(dir.path());
    let a = shapes::icosphere(1);
    let b = shapes::smooth_deformation(&a, 1, 0.05);
    assert_ne!(mesh_hash(&a), mesh_hash(&b));
    cache.basis(&a, 6).unwrap();
    cache.basis(&b, 6).unwrap();
    cache.basis(&a, 8).unwrap();
    assert_eq!(list_entries(dir.path()).unwrap().len(), 3);
}

#[test]
fn corrupted_entries_are_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BasisCache::new(dir.path());
    let mesh = shapes::icosphere(1);
    let (good, _) = cache.basis(&mesh, 6).unwrap();
    let path = cache.entry_path(&mesh_hash(&mesh), 6).unwrap();
    let original = std::fs::read(&path).unwrap();

    let mut flipped = original.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    for corrupt in [flipped, original[..original.len() / 3].to_vec(), b"garbage".to_vec(), Vec::new()] {
        std::fs::write(&path, &corrupt).unwrap();
        let (basis, status) = cache.basis(&mesh, 6).unwrap();
        assert_eq!(status, CacheStatus::Recomputed);
        assert_eq!(basis, good);
        assert_eq!(std::fs::read(&path).unwrap(), original);
    }
}

#[test]
fn entries_are_bound_to_their_mesh() {
    let mesh = shapes::icosphere(1);
    let basis = compute_basis(&build_laplacian(&mesh).unwrap(), 5).unwrap();
    let hash = mesh_hash(&mesh);
    let bytes = encode(&basis, &hash);
    assert_eq!(decode(&bytes, &hash, mesh.n(), 5).unwrap(), basis);
    let other = mesh_hash(&shapes::icosphere(0));
    assert!(decode(&bytes, &other, mesh.n(), 5).is_err());
    assert!(decode(&bytes, &hash, mesh.n(), 6).is_err());
}

#[test]
fn disabled_cache_computes() {
    let (_, status) = BasisCache::disabled().basis(&shapes::icosphere(0), 4).unwrap();
    assert_eq!(status, CacheStatus::Uncached);
}
