//! End-to-end pipeline composition through files. Every stage is saved and
//! reloaded before the next stage consumes it; the final results must equal
//! a pure in-memory run bit for bit, so the file formats cannot leak
//! precision anywhere in the pipeline.

use std::path::Path;

use uep_core::density::{
    collect_counts, extract_local_counts, generate_density_map, CountCollection, DensityMap,
    KernelSpec, LocalCountMap, PointAnnotation,
};
use uep_core::io::annotations::{
    load_annotations_csv, load_annotations_json, save_annotations_csv, save_annotations_json,
};
use uep_core::io::formats::{
    load_counts, load_error_report, load_iph, load_partition, load_proxies, save_counts,
    save_error_report, save_iph, save_partition, save_proxies, PartitionRecord,
};
use uep_core::io::grids::{
    load_class_map, load_density_csv, load_density_map, load_local_counts,
    load_local_counts_csv, save_class_map, save_density_csv, save_density_map,
    save_local_counts, save_local_counts_csv,
};
use uep_core::partition::{partition_uep, Partition};
use uep_core::proxy::{compute_mcp, derive_iph, IphPair, ProxyTable};
use uep_core::quantize::{
    decode_count_map, decode_iph, encode_class_map, error_decomposition, ClassMap, ErrorReport,
};
use uep_core::synth::{synth_scene, SceneLayout};

const PATCH: usize = 8;
const M: usize = 12;
const T0: f64 = 1.6e-4;

fn scenes() -> Vec<PointAnnotation> {
    let clustered = SceneLayout::GaussianClusters {
        clusters: 3,
        spread: 22.0,
    };
    vec![
        synth_scene(500, clustered, 256, 256, 101).unwrap(),
        synth_scene(900, SceneLayout::Uniform, 256, 192, 102).unwrap(),
        synth_scene(1400, clustered, 320, 256, 103).unwrap(),
        synth_scene(250, SceneLayout::Uniform, 192, 192, 104).unwrap(),
        synth_scene(2000, clustered, 256, 256, 105).unwrap(),
    ]
}

fn epsilon_for(t: &CountCollection) -> f64 {
    1e-6 * t.len() as f64 * t.max_count()
}

struct MemoryRun {
    local_counts: Vec<LocalCountMap>,
    collection: CountCollection,
    partition: Partition,
    proxies: ProxyTable,
    class_maps: Vec<ClassMap>,
    decoded: Vec<LocalCountMap>,
    report: ErrorReport,
}

fn run_in_memory(anns: &[PointAnnotation]) -> MemoryRun {
    let spec = KernelSpec::fixed(3.0);
    let local_counts: Vec<LocalCountMap> = anns
        .iter()
        .map(|a| {
            let d = generate_density_map(a, &spec).unwrap();
            extract_local_counts(&d, PATCH).unwrap()
        })
        .collect();
    let collection = collect_counts(&local_counts).unwrap();
    let (partition, _) =
        partition_uep(&collection, M, T0, epsilon_for(&collection), None).unwrap();
    let proxies = compute_mcp(&collection, &partition).unwrap();
    let class_maps: Vec<ClassMap> = local_counts
        .iter()
        .map(|lc| encode_class_map(lc, &partition).unwrap().map)
        .collect();
    let decoded: Vec<LocalCountMap> = class_maps
        .iter()
        .map(|c| decode_count_map(c, &proxies).unwrap())
        .collect();
    let report = error_decomposition(&decoded, &local_counts, &partition).unwrap();
    MemoryRun {
        local_counts,
        collection,
        partition,
        proxies,
        class_maps,
        decoded,
        report,
    }
}

fn hop<T, E: std::fmt::Debug>(
    dir: &Path,
    name: &str,
    value: &T,
    save: impl Fn(&Path, &T) -> Result<(), E>,
    load: impl Fn(&Path) -> Result<T, E>,
) -> T {
    let path = dir.join(name);
    save(&path, value).unwrap();
    load(&path).unwrap()
}

#[test]
fn file_hopped_pipeline_equals_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let anns = scenes();
    let memory = run_in_memory(&anns);

    // Stage 1: annotations through JSON.
    let ann_path = dir.join("annotations.json");
    save_annotations_json(&ann_path, &anns).unwrap();
    let anns = load_annotations_json(&ann_path).unwrap();

    // Stage 2: density maps and local counts through binary grids. The
    // file stem is the image id, so grids live in per-kind directories.
    for kind in ["density", "counts", "classes"] {
        std::fs::create_dir(dir.join(kind)).unwrap();
    }
    let spec = KernelSpec::fixed(3.0);
    let mut local_counts = Vec::new();
    for ann in &anns {
        let d = generate_density_map(ann, &spec).unwrap();
        let name = format!("density/{}.bin", ann.image_id);
        let d = hop(dir, &name, &d, save_density_map, load_density_map);
        let lc = extract_local_counts(&d, PATCH).unwrap();
        let name = format!("counts/{}.bin", ann.image_id);
        local_counts.push(hop(dir, &name, &lc, save_local_counts, load_local_counts));
    }
    assert_eq!(local_counts, memory.local_counts);

    // Stage 3: the pooled collection through its JSON document.
    let collection = hop(
        dir,
        "collection.json",
        &collect_counts(&local_counts).unwrap(),
        save_counts,
        load_counts,
    );
    assert_eq!(collection, memory.collection);

    // Stage 4: partition search, saved with its search metadata.
    let (partition, state) =
        partition_uep(&collection, M, T0, epsilon_for(&collection), None).unwrap();
    let record = hop(
        dir,
        "partition.json",
        &PartitionRecord::from_search(partition, &state),
        save_partition,
        load_partition,
    );
    assert_eq!(record.partition, memory.partition);
    assert_eq!(record.epsilon, Some(state.epsilon));

    // Stage 5: proxies.
    let proxies = hop(
        dir,
        "proxies.json",
        &compute_mcp(&collection, &record.partition).unwrap(),
        save_proxies,
        load_proxies,
    );
    assert_eq!(proxies, memory.proxies);

    // Stage 6: class maps through the binary container.
    let mut decoded = Vec::new();
    for (i, lc) in local_counts.iter().enumerate() {
        let encoded = encode_class_map(lc, &record.partition).unwrap();
        assert_eq!(encoded.clamped, 0);
        let class_map = hop(
            dir,
            &format!("classes/{}.bin", lc.image_id),
            &encoded.map,
            save_class_map,
            load_class_map,
        );
        assert_eq!(class_map, memory.class_maps[i]);
        decoded.push(decode_count_map(&class_map, &proxies).unwrap());
    }
    assert_eq!(decoded, memory.decoded);

    // Stage 7: the error report through its JSON document.
    let report = hop(
        dir,
        "report.json",
        &error_decomposition(&decoded, &local_counts, &record.partition).unwrap(),
        save_error_report,
        load_error_report,
    );
    assert_eq!(report, memory.report);

    // Count preservation survives the whole file pipeline: the pooled signed
    // error of mean proxies on their own fitting collection vanishes.
    assert!(
        report.pooled_signed.abs() <= 1e-9 * collection.len() as f64,
        "pooled signed error {}",
        report.pooled_signed
    );
}

#[test]
fn iph_pipeline_through_files_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let memory = run_in_memory(&scenes());

    let pair = derive_iph(&memory.collection, &memory.partition, &memory.proxies).unwrap();
    let path = dir.join("iph.json");
    save_iph(&path, &pair).unwrap();
    let loaded: IphPair = load_iph(&path).unwrap();
    assert_eq!(loaded, pair);

    for lc in &memory.local_counts {
        let c0 = encode_class_map(lc, &loaded.head0.partition).unwrap().map;
        let c1 = encode_class_map(lc, &loaded.head1.partition).unwrap().map;
        let from_files = decode_iph(&c0, &c1, &loaded).unwrap();
        let c0_mem = encode_class_map(lc, &pair.head0.partition).unwrap().map;
        let c1_mem = encode_class_map(lc, &pair.head1.partition).unwrap().map;
        assert_eq!(from_files, decode_iph(&c0_mem, &c1_mem, &pair).unwrap());
    }
}

#[test]
fn csv_and_binary_grid_containers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let ann = synth_scene(
        700,
        SceneLayout::GaussianClusters {
            clusters: 2,
            spread: 18.0,
        },
        128,
        128,
        7,
    )
    .unwrap();
    let d = generate_density_map(&ann, &KernelSpec::fixed(2.0)).unwrap();
    let lc = extract_local_counts(&d, PATCH).unwrap();

    let from_binary: DensityMap = hop(dir, "d.bin", &d, save_density_map, load_density_map);
    let from_csv: DensityMap = hop(dir, "d.csv", &d, save_density_csv, load_density_csv);
    assert_eq!(from_binary, from_csv);

    let bin_lc = hop(dir, "lc.bin", &lc, save_local_counts, load_local_counts);
    let csv_path = dir.join("lc.csv");
    save_local_counts_csv(&csv_path, &lc).unwrap();
    let csv_lc = load_local_counts_csv(&csv_path, PATCH).unwrap();
    assert_eq!(bin_lc, csv_lc);
}

#[test]
fn csv_and_json_annotation_containers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let anns = scenes();

    let json_path = dir.join("anns.json");
    save_annotations_json(&json_path, &anns).unwrap();
    let from_json = load_annotations_json(&json_path).unwrap();

    let points_path = dir.join("points.csv");
    let dims_path = dir.join("dims.csv");
    save_annotations_csv(&points_path, &dims_path, &anns).unwrap();
    let from_csv = load_annotations_csv(&points_path, &dims_path).unwrap();

    assert_eq!(from_json, from_csv);
    assert_eq!(from_json, anns);
}
