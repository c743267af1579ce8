//! Regenerates the bundled synthetic fixture files under `fixtures/`.

use std::path::PathBuf;

use sortnet::data::write_letor;
use sortnet::fixture::{fixture_split, FIXTURE_SPLITS};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, ..) in FIXTURE_SPLITS {
        let groups = fixture_split(name).expect("known split");
        let path = dir.join(format!("{name}.txt"));
        write_letor(&groups, std::fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
