use echo_bench::plot::{emit_plots, render_panel};
use echo_bench::sweep::CellSummary;

fn cell(b: usize, k: usize, converged: usize) -> CellSummary {
    CellSummary {
        dataset: "d<&>".into(),
        algorithm: "gd".into(),
        batch_size: b,
        k: k.to_string(),
        k_mean: k as f64,
        eta: 0.5 / k as f64,
        mean_steps: 100.0 * k as f64,
        std_steps: 10.0,
        mean_samples: 100.0 * b as f64,
        std_samples: 50.0,
        converged,
        runs: 3,
    }
}

fn has_class(node: &roxmltree::Node, class: &str) -> bool {
    node.attribute("class")
        .is_some_and(|c| c.split(' ').any(|x| x == class))
}

#[test]
fn single_cell_gives_one_panel_with_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_plots(&[cell(16, 1, 3)], dir.path()).unwrap();
    assert_eq!(paths.len(), 1);
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let points = doc.descendants().filter(|n| has_class(n, "point")).count();
    assert_eq!(points, 2);
    assert_eq!(doc.descendants().filter(|n| has_class(n, "eta")).count(), 2);
}

#[test]
fn unconverged_cells_use_a_distinct_marker() {
    let cells = [cell(16, 1, 3), cell(16, 8, 2)];
    let text = render_panel(&cells.iter().collect::<Vec<_>>());
    let doc = roxmltree::Document::parse(&text).unwrap();
    let crosses: Vec<_> = doc
        .descendants()
        .filter(|n| has_class(n, "unconverged"))
        .collect();
    assert_eq!(crosses.len(), 2);
    assert!(crosses.iter().all(|n| n.tag_name().name() == "path"));
    let dots = doc
        .descendants()
        .filter(|n| n.tag_name().name() == "circle")
        .count();
    assert_eq!(dots, 2);
    assert_eq!(
        doc.descendants().filter(|n| has_class(n, "band")).count(),
        2
    );
}

#[test]
fn one_panel_per_batch_size() {
    let dir = tempfile::tempdir().unwrap();
    let cells: Vec<CellSummary> = [16, 4096]
        .into_iter()
        .flat_map(|b| [1, 2, 4, 8].map(|k| cell(b, k, 3)))
        .collect();
    let paths = emit_plots(&cells, dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    for p in paths {
        roxmltree::Document::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
    }
}

#[test]
fn empty_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plots(&[], dir.path()).is_err());
}
