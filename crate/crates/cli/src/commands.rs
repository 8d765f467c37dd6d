use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lattice_entanglement::bandstructure::{
    compute_wannier, solve_band_structure, Envelope, DEFAULT_PLANE_WAVES, DEFAULT_QUASIMOMENTA,
    DEFAULT_REAL_HALF_EXTENT, DEFAULT_RESOLUTION,
};
use lattice_entanglement::bound::{
    check_monotone_under_local_channels, entanglement_bound, verify_witness_nonnegativity,
    MomentumSpec, SamplerConfig, K_HAT,
};
use lattice_entanglement::hubbard::{
    bose_hubbard_ground_state, thermal_one_body_dm, BoseHubbardParams, Geometry,
};
use lattice_entanglement::imaging::io::{
    read_stack, write_map_csv, write_report, write_stack, FrameFormat,
};
use lattice_entanglement::imaging::{
    pixel_aligned_grid, synthesize_stack, AnalysisOptions, Analyzer, FrameGeometry, ImageStack,
    Pixel,
};
use lattice_entanglement::states::{
    build_coherent_mixture, build_symmetric_state, build_two_mode_psi, data_hiding_success,
    one_body_dm, OneBodyDM, TWO_SITE_POSITIONS,
};
use lattice_entanglement::tof::{column_density, Approximation, TofParams};
use num_complex::Complex64;

use crate::config::{CalibrationArgs, LatticeArgs, RunConfig};
use crate::CliError;

const DEFAULT_SIM_DEPTH: f64 = 9.0;
/// Sweep grids for the small-system trend tables.
const U_SWEEP: [f64; 6] = [0.0, 2.0, 5.0, 10.0, 20.0, 40.0];
const T_SWEEP: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))
}

pub fn parse_pixel(s: &str) -> Result<Pixel, String> {
    let (i, j) = s.split_once(',').ok_or("expected `i,j`")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(i)?, parse(j)?))
}

fn geometry_for(kind: &str, sites: usize) -> Result<Geometry, CliError> {
    let g = match kind {
        "chain" => Geometry::chain(sites)?,
        "ring" => Geometry::ring(sites)?,
        "auto" if sites < 3 => Geometry::chain(sites)?,
        "auto" => Geometry::ring(sites)?,
        other => {
            return Err(CliError::validation(format!(
                "invalid argument `geometry`: `{other}` is not chain, ring or auto"
            )))
        }
    };
    Ok(g)
}

pub fn bands(
    config: &RunConfig,
    lattice: &LatticeArgs,
    n_bands: usize,
    out: &Path,
) -> Result<(), CliError> {
    let (params, t) = lattice.resolve(&config.lattice, None)?;
    if n_bands == 0 {
        return Err(CliError::validation(
            "invalid argument `bands`: need at least one band",
        ));
    }
    create_dir(out)?;
    let n_pw = DEFAULT_PLANE_WAVES.max(2 * n_bands + 5) | 1;
    let spectrum = solve_band_structure(&params, n_bands, DEFAULT_QUASIMOMENTA, n_pw)?;
    spectrum.write_csv(&out.join("bands.csv"))?;
    let lowest = solve_band_structure(&params, 1, DEFAULT_QUASIMOMENTA, DEFAULT_PLANE_WAVES)?;
    let w = compute_wannier(&lowest, DEFAULT_REAL_HALF_EXTENT, DEFAULT_RESOLUTION)?;
    w.write_real_csv(&out.join("wannier.csv"))?;
    w.write_fourier_csv(&out.join("wannier_fourier.csv"))?;
    let env = Envelope::new(&w, &params, t)?;
    write_text(&out.join("envelope.csv"), &envelope_table(&env, &w)?)?;
    println!(
        "bands: s = {}, tau = {:.2}, {} bands on {} quasimomenta -> {}",
        params.depth_s,
        params.tau(t),
        n_bands,
        spectrum.quasimomenta.len(),
        out.display()
    );
    Ok(())
}

/// Envelope along `k_y = 0`: `phi = a k_x / 2 pi`, `|w~(phi)|^2` and `f` in m^-2.
fn envelope_table(
    env: &Envelope,
    w: &lattice_entanglement::bandstructure::WannierTable,
) -> Result<String, CliError> {
    let mut out = String::from("phi,wtilde_sq,f\n");
    for (i, &phi) in w.fourier_grid.values().iter().enumerate().step_by(16) {
        let f = env
            .at_k([2.0 * std::f64::consts::PI * phi, 0.0])
            .unwrap_or(0.0);
        let _ = writeln!(
            out,
            "{phi:.9e},{:.12e},{f:.12e}",
            w.wtilde_samples[i].norm_sqr()
        );
    }
    Ok(out)
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Interaction over tunneling; the lattice depth only sets the expansion envelope.
    #[arg(long = "U-over-J")]
    pub u_over_j: Option<f64>,
    /// Canonical temperature in units of J; omitted means the ground state.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// `chain`, `ring`, or `auto` (chain for two sites, ring otherwise).
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame side length in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Density samples per pixel along each axis.
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Gaussian noise on the optical density.
    #[arg(long)]
    pub noise: Option<f64>,
    /// True background optical density.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Atoms in the imaged cloud; the state is replicated over identical tubes.
    #[arg(long)]
    pub total_atoms: Option<f64>,
    /// `csv` or `olif`.
    #[arg(long)]
    pub format: Option<String>,
    /// `exact`, `stationary` or `far-field`.
    #[arg(long)]
    pub approximation: Option<String>,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(config: &RunConfig, args: &SimulateArgs) -> Result<(), CliError> {
    let s = &config.simulate;
    let (lattice, t) = args
        .lattice
        .resolve(&config.lattice, Some(DEFAULT_SIM_DEPTH))?;
    let calib = args.calibration.resolve(&config.calibration)?;
    let sites = args.sites.or(s.sites).unwrap_or(2);
    let atoms = args.atoms.or(s.atoms).unwrap_or(2);
    let u = args.u_over_j.or(s.u_over_j).unwrap_or(0.0);
    let temperature = args.temperature.or(s.temperature);
    let geometry = geometry_for(
        args.geometry
            .as_deref()
            .or(s.geometry.as_deref())
            .unwrap_or("auto"),
        sites,
    )?;
    let n_frames = args.frames.or(s.frames).unwrap_or(40);
    let seed = args.seed.or(s.seed).unwrap_or(0);
    let width = args.width.or(s.width).unwrap_or(401);
    let sub = args.subsamples.or(s.subsamples).unwrap_or(3);
    let noise = args.noise.or(s.noise).unwrap_or(0.01);
    let mu0 = args.mu0.or(s.mu0).unwrap_or(0.05);
    let total = args.total_atoms.or(s.total_atoms).unwrap_or(1e4);
    let format = match args
        .format
        .as_deref()
        .or(s.format.as_deref())
        .unwrap_or("csv")
    {
        "csv" => FrameFormat::Csv,
        "olif" => FrameFormat::Olif,
        other => {
            return Err(CliError::validation(format!(
                "invalid argument `format`: `{other}`"
            )))
        }
    };
    let approximation = match args
        .approximation
        .as_deref()
        .or(s.approximation.as_deref())
        .unwrap_or("exact")
    {
        "exact" => Approximation::Exact,
        "stationary" => Approximation::StationaryPhase,
        "far-field" => Approximation::FarField,
        other => {
            return Err(CliError::validation(format!(
                "invalid argument `approximation`: `{other}`"
            )))
        }
    };
    if n_frames == 0 {
        return Err(CliError::validation(
            "invalid argument `frames`: need at least one frame",
        ));
    }
    if width < 7 || sub == 0 {
        return Err(CliError::validation(
            "invalid argument `width`: frames need at least 7x7 pixels and one subsample",
        ));
    }
    if !(total.is_finite() && total >= 0.0) {
        return Err(CliError::validation(
            "invalid argument `total_atoms`: must be finite and >= 0",
        ));
    }
    if !(noise.is_finite() && noise >= 0.0 && mu0.is_finite()) {
        return Err(CliError::validation(
            "invalid argument `noise`/`mu0`: must be finite, noise >= 0",
        ));
    }
    let params = BoseHubbardParams::new(1.0, u, atoms, geometry.clone())?;
    let tof = TofParams::new(&lattice, t, approximation)?;

    let g = match temperature {
        None => one_body_dm(
            &bose_hubbard_ground_state(&params)?.state,
            geometry.positions(),
        )?,
        Some(temp) => thermal_one_body_dm(&params, temp)?,
    };
    let scale = if atoms == 0 {
        0.0
    } else {
        total / atoms as f64
    };
    let g_scaled = g.scaled(scale);
    let w = lattice_entanglement::bandstructure::wannier_for(&lattice)?;
    let frame_geo = FrameGeometry::new(width, width, calib.pixel_size);
    let grid = pixel_aligned_grid(width, calib.pixel_size, sub, 0.0);
    let field = column_density(&g_scaled, &w, grid, grid, &tof)?;
    let frames = synthesize_stack(&field, &frame_geo, &calib, mu0, noise, n_frames, seed)?;
    let stack = ImageStack::new(frames, [0.0, 0.0], lattice, t, calib, Some(seed))?;
    let manifest = write_stack(&args.out, &stack, format)?;
    g.write_csv(&args.out.join("one_body_dm.csv"))?;
    println!(
        "simulate: L = {sites}, N = {atoms}, U/J = {u}, {} -> {} frames of {width}x{width}, {total} atoms, manifest {}",
        temperature.map_or("ground state".to_string(), |t| format!("T/J = {t}")),
        n_frames,
        manifest.display()
    );
    Ok(())
}

fn same_or_inside(out: &Path, dir: &Path) -> bool {
    match (
        fs::canonicalize(dir),
        out.canonicalize().or_else(|_| {
            // not yet created: resolve the parent
            let parent = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            fs::canonicalize(parent).map(|p| p.join(out.file_name().unwrap_or_default()))
        }),
    ) {
        (Ok(d), Ok(o)) => o.starts_with(d),
        _ => false,
    }
}

pub fn analyze(
    config: &RunConfig,
    stack_path: &Path,
    out: &Path,
    no_symmetry: bool,
    pixels: Vec<Pixel>,
) -> Result<(), CliError> {
    let manifest_path = if stack_path.is_dir() {
        stack_path.join("manifest.toml")
    } else {
        stack_path.to_path_buf()
    };
    let stack_dir = manifest_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    if same_or_inside(out, &stack_dir) {
        return Err(CliError::validation(format!(
            "invalid argument `out`: {} is inside the stack directory; analyze never writes there",
            out.display()
        )));
    }
    let region = if pixels.is_empty() {
        config
            .analyze
            .region
            .as_ref()
            .map(|r| r.iter().map(|&[i, j]| (i, j)).collect())
    } else {
        Some(pixels)
    };
    let symmetry = !no_symmetry && config.analyze.symmetry.unwrap_or(true);
    let (_, stack) = read_stack(&manifest_path)?;
    let w = lattice_entanglement::bandstructure::wannier_for(&stack.lattice)?;
    let analyzer = Analyzer::for_stack(&stack, &w)?;
    let options = AnalysisOptions {
        region,
        symmetry,
        per_pixel_map: true,
    };
    let report = analyzer.analyze(&stack.frames, &options)?;

    create_dir(out)?;
    write_report(&out.join("report.toml"), &report)?;
    write_map_csv(&out.join("map.csv"), &report)?;
    let mut excluded = String::from("i,j\n");
    for (i, j) in analyzer.excluded_pixels() {
        let _ = writeln!(excluded, "{i},{j}");
    }
    write_text(&out.join("excluded.csv"), &excluded)?;

    println!("frames: {}", report.frames);
    println!(
        "symmetry averaging: {}",
        if report.symmetry { "on" } else { "off" }
    );
    println!(
        "region pixels: {} ({} weighted)",
        report.region.len(),
        report.weights.len()
    );
    println!("N_bar: {:.3}", report.n_bar);
    println!("E_bar_A: {:.3}", report.e_bar_a);
    match report.sigma_stat {
        Some(s) => println!("sigma_stat: {s:.3}"),
        None => println!("sigma_stat: unavailable (needs at least 2 frames)"),
    }
    println!(
        "sigma_sys: {:.3} (alpha {:.3}, mu0 {:.3}, envelope {:.3})",
        report.sigma_sys,
        report.systematic.alpha,
        report.systematic.mu0,
        report.systematic.envelope
    );
    println!("sigma_disc: {:.3}", report.sigma_disc);
    println!("sigma_total: {:.3}", report.sigma_total);
    println!("excluded pixels: {}", report.excluded_pixels);
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

struct ExampleRow {
    kind: &'static str,
    parameter: String,
    computed: f64,
    closed_form: f64,
    tolerance: f64,
}

fn example_rows() -> Result<Vec<ExampleRow>, CliError> {
    let spec = MomentumSpec::far_field([std::f64::consts::PI, 0.0]);
    let bound_of = |g: OneBodyDM| entanglement_bound(&g, &spec).map(|b| b.e_of_k);
    let mut rows = Vec::new();
    for n in 1..=10 {
        let psi = build_two_mode_psi(n)?;
        let closed = 2.0 / (n + 1) as f64
            * (0..n)
                .map(|m| ((m + 1) as f64).sqrt() * ((n - m) as f64).sqrt())
                .sum::<f64>();
        rows.push(ExampleRow {
            kind: "two_mode_psi",
            parameter: format!("N={n}"),
            computed: bound_of(one_body_dm(&psi, &TWO_SITE_POSITIONS)?)?,
            closed_form: closed,
            tolerance: 1e-9,
        });
    }
    for a in [0.5, 1.0, 2.0] {
        let rho = build_coherent_mixture(Complex64::new(a, 0.0), 40)?;
        rows.push(ExampleRow {
            kind: "coherent_mixture",
            parameter: format!("alpha={a}"),
            computed: bound_of(one_body_dm(&rho, &TWO_SITE_POSITIONS)?)?,
            closed_form: 2.0 * a * a,
            tolerance: 1e-5,
        });
    }
    for n in 1..=10 {
        let sym = build_symmetric_state(2, n)?;
        rows.push(ExampleRow {
            kind: "symmetric",
            parameter: format!("N={n}"),
            computed: bound_of(one_body_dm(&sym, &TWO_SITE_POSITIONS)?)?,
            closed_form: n as f64,
            tolerance: 1e-9,
        });
    }
    for n in 1..=10 {
        let c = |k: usize| (binomial(n, k) / 2f64.powi(n as i32)).sqrt();
        let closed = 0.25 * (1..=n).map(|k| (c(k) + c(k - 1)).powi(2)).sum::<f64>();
        rows.push(ExampleRow {
            kind: "data_hiding",
            parameter: format!("N={n}"),
            computed: data_hiding_success(&build_symmetric_state(2, n)?)?,
            closed_form: closed,
            tolerance: 1e-9,
        });
    }
    Ok(rows)
}

pub fn examples(out: Option<&Path>) -> Result<(), CliError> {
    let rows = example_rows()?;
    let mut csv = String::from("kind,parameter,computed,closed_form,abs_diff\n");
    println!(
        "{:<18} {:<10} {:>16} {:>16} {:>10}",
        "kind", "param", "computed", "closed form", "|diff|"
    );
    let mut worst = Vec::new();
    for r in &rows {
        let diff = (r.computed - r.closed_form).abs();
        println!(
            "{:<18} {:<10} {:>16.10} {:>16.10} {:>10.2e}",
            r.kind, r.parameter, r.computed, r.closed_form, diff
        );
        let _ = writeln!(
            csv,
            "{},{},{:.15e},{:.15e},{diff:.3e}",
            r.kind, r.parameter, r.computed, r.closed_form
        );
        if diff > r.tolerance {
            worst.push(format!("{} {}: {diff:.3e}", r.kind, r.parameter));
        }
    }
    if let Some(path) = out {
        write_text(path, &csv)?;
    }
    if worst.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "closed-form mismatch: {}",
            worst.join("; ")
        )))
    }
}

pub fn reproduce(
    config: &RunConfig,
    sites: Option<usize>,
    atoms: Option<usize>,
    geometry: Option<String>,
    out: &Path,
) -> Result<(), CliError> {
    let r = &config.reproduce;
    let sites = sites.or(r.sites).unwrap_or(3);
    let atoms = atoms.or(r.atoms).unwrap_or(3);
    let geometry = geometry_for(
        geometry
            .as_deref()
            .or(r.geometry.as_deref())
            .unwrap_or("auto"),
        sites,
    )?;
    let u_grid = r.u_over_j.clone().unwrap_or_else(|| U_SWEEP.to_vec());
    let t_grid = r.temperatures.clone().unwrap_or_else(|| T_SWEEP.to_vec());
    let thermal_u = r.thermal_u_over_j.unwrap_or(2.0);
    // validate every parameter set first
    let u_params = u_grid
        .iter()
        .map(|&u| BoseHubbardParams::new(1.0, u, atoms, geometry.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let t_params = BoseHubbardParams::new(1.0, thermal_u, atoms, geometry.clone())?;
    if let Some(t) = t_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CliError::validation(format!(
            "invalid argument `temperatures`: {t} is not positive"
        )));
    }
    let spec = MomentumSpec::new(K_HAT, lattice_entanglement::bound::DEFAULT_TAU)?;
    create_dir(out)?;

    let mut csv = String::from("u_over_j,e_khat,n_total,e_over_n\n");
    let mut u_values = Vec::new();
    for (u, p) in u_grid.iter().zip(&u_params) {
        let g = one_body_dm(&bose_hubbard_ground_state(p)?.state, geometry.positions())?;
        let b = entanglement_bound(&g, &spec)?;
        let _ = writeln!(
            csv,
            "{u},{:.12e},{:.12e},{:.12e}",
            b.e_of_k,
            b.n_total,
            ratio(b.e_of_k, b.n_total)
        );
        u_values.push((*u, b.e_of_k, b.n_total));
    }
    write_text(&out.join("bound_vs_interaction.csv"), &csv)?;

    let mut csv = String::from("temperature_over_j,e_khat,n_total,e_over_n\n");
    let mut t_values = Vec::new();
    for &t in &t_grid {
        let g = thermal_one_body_dm(&t_params, t)?;
        let b = entanglement_bound(&g, &spec)?;
        let _ = writeln!(
            csv,
            "{t},{:.12e},{:.12e},{:.12e}",
            b.e_of_k,
            b.n_total,
            ratio(b.e_of_k, b.n_total)
        );
        t_values.push(b.e_of_k);
    }
    write_text(&out.join("bound_vs_temperature.csv"), &csv)?;

    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let e_u: Vec<f64> = u_values.iter().map(|v| v.1).collect();
    println!("L = {sites}, N = {atoms}, bonds {:?}", geometry.bonds());
    println!(
        "E(k_hat) vs U/J {u_grid:?}: {e_u:.4?} (non-increasing: {})",
        non_increasing(&e_u)
    );
    println!(
        "E(k_hat) vs T/J {t_grid:?} at U/J = {thermal_u}: {t_values:.4?} (non-increasing: {})",
        non_increasing(&t_values)
    );
    if let Some(&(_, e, n)) = u_values.iter().find(|v| v.0 == 0.0) {
        println!("U/J = 0: E(k_hat)/N = {:.6}", ratio(e, n));
    }
    Ok(())
}

fn ratio(e: f64, n: f64) -> f64 {
    if n > 0.0 {
        e / n
    } else {
        0.0
    }
}

pub fn verify(
    config: &RunConfig,
    trials: Option<usize>,
    channel_states: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let v = &config.verify;
    let trials = trials.or(v.trials).unwrap_or(1000);
    let channel_states = channel_states.or(v.channel_states).unwrap_or(100);
    let seed = seed.or(v.seed).unwrap_or(0);
    let positions = vec![[0, 0, 0], [1, 0, 0]];
    let cfg = SamplerConfig::new(positions, 3, 4)?;
    let ks: Vec<[f64; 2]> = (0..16)
        .map(|i| {
            let (a, b) = ((i % 4) as f64, (i / 4) as f64);
            [
                -std::f64::consts::PI + a * std::f64::consts::FRAC_PI_2,
                -std::f64::consts::PI + b * std::f64::consts::FRAC_PI_2 + 0.3,
            ]
        })
        .collect();
    let tau = lattice_entanglement::bound::DEFAULT_TAU;
    let witness = verify_witness_nonnegativity(&cfg, trials, &ks, tau, seed)?;
    println!("{witness}");
    let spec = MomentumSpec::new([std::f64::consts::PI, 0.4], tau)?;
    let channels =
        check_monotone_under_local_channels(&cfg, channel_states, 2, &spec, seed.wrapping_add(1))?;
    println!("{channels}");
    if witness.passed() && channels.passed() {
        Ok(())
    } else {
        Err(CliError::Numerical(
            "sampled checks found violations".into(),
        ))
    }
}
