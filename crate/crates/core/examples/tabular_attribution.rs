use attriq::attrib::tabular::ExactShapleyExplainer;
use attriq::attrib::{Background, TabularExplainer};
use attriq::io::load_model;

fn main() -> attriq::Result<()> {
    let model = load_model("fixtures/linear_model.json".as_ref())?;
    let background = Background::new(vec![
        vec![5.0, 3.4, 1.6, 0.4],
        vec![6.1, 2.8, 4.7, 1.3],
    ])?;
    let explainer = ExactShapleyExplainer { background };
    let attr = explainer.explain(&model, &[5.9, 3.0, 5.1, 1.8], 2, 0)?;
    for (name, value) in attr.feature_names.iter().zip(&attr.values) {
        println!("{name}: {value:+.4}");
    }
    Ok(())
}
