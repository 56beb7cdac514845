#![allow(dead_code)]

use std::path::PathBuf;

use rfinv::scene::{load_scene, Scene};

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

pub fn shoebox() -> Scene {
    load_scene(scene_path("shoebox.json")).expect("shoebox scene loads")
}

pub fn single_wall() -> Scene {
    load_scene(scene_path("single_wall.json")).expect("single wall scene loads")
}
