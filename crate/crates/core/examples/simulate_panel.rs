//! Simulate the three synthetic designs and export one of them as CSV.

use paneltobit::montecarlo::{Design, DgpSpec};

fn main() -> paneltobit::Result<()> {
    for design in [Design::Table1, Design::C60, Design::C75] {
        let dgp = DgpSpec::design(design, 1000, 10, 1, 7);
        let (latent, data) = dgp.simulate(0)?;
        let below: usize = (0..data.n_units)
            .map(|i| latent.row(i).iter().filter(|v| **v < 0.0).count())
            .sum();
        println!(
            "{design:?}: zero fraction {:.3}, latent draws below zero {}, all-zero units {:.3}",
            data.zero_fraction(),
            below,
            data.all_zero_fraction()
        );
    }

    let dgp = DgpSpec::design(Design::Table1, 50, 10, 1, 7);
    let (_, data) = dgp.simulate(0)?;
    let path = std::env::temp_dir().join("paneltobit_example_panel.csv");
    data.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {} units with {} held-out period to {}", data.n_units, data.n_holdout, path.display());
    Ok(())
}
