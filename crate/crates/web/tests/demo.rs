use hyve_web::{camera_kernels_json, train_demo_json, wroi_curves_json};

#[test]
fn curves_cover_the_range() {
    let v = wroi_curves_json(5, 400.0, 1000.0, 0.0).unwrap();
    let means: Vec<f64> = serde_json::from_value(v["means"].clone()).unwrap();
    assert_eq!(means, vec![400.0, 550.0, 700.0, 850.0, 1000.0]);
    assert_eq!(v["curves"].as_array().unwrap().len(), 5);
    assert_eq!(v["xs"][0], 400.0);
}

#[test]
fn kernels_follow_the_camera() {
    let full = camera_kernels_json("specim", 4, 0.25, 1).unwrap();
    let half = camera_kernels_json("specim/2", 4, 0.25, 1).unwrap();
    assert_eq!(full["kernel_norms"].as_array().unwrap().len(), 224);
    assert_eq!(half["kernel_norms"].as_array().unwrap().len(), 112);
    // Channel 2k of the full camera is channel k of the subset.
    assert_eq!(full["kernel_norms"][10], half["kernel_norms"][5]);
    assert!(camera_kernels_json("nope", 4, 0.25, 1).is_err());
}

#[test]
fn training_demo_reports_every_epoch() {
    let v = train_demo_json(3, 2, 3).unwrap();
    assert_eq!(v["loss"].as_array().unwrap().len(), 2);
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 3 * 3);
    assert_eq!(v["test_oa"].as_object().unwrap().len(), 2);
    assert_eq!(v, train_demo_json(3, 2, 3).unwrap());
}
