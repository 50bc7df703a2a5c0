use voxellate::io::{encode_labels, read_label_image, write_label_image, ImageMeta};
use voxellate::{Boundary, Domain, Kind, LabelImage, VoxelGrid};

#[test]
fn two_by_two_label_payload() {
    let grid = VoxelGrid::new(vec![2, 2], Domain::unit(2, Boundary::NonPeriodic).unwrap()).unwrap();
    let img = LabelImage::new(grid, vec![0, 1, 1, 0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.bin");
    write_label_image(&path, &img, &ImageMeta { kind: Kind::Voronoi, n_sites: 2, seed: None }).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let hex: Vec<String> = bytes.chunks(4).map(|c| c.iter().map(|b| format!("{b:02x}")).collect()).collect();
    assert_eq!(hex.join(" "), "00000000 01000000 01000000 00000000");
    assert_eq!(bytes, encode_labels(img.labels()));
    assert_eq!(read_label_image(&path).unwrap().0, img);
}
