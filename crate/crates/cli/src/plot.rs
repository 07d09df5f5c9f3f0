//! Gnuplot script text for the emitted CSV files.

const PREAMBLE: &str = "set datafile separator ','\nset key autotitle columnhead\nset grid\n";

pub fn trace_script(n: usize) -> String {
    let mut s = String::from(PREAMBLE);
    s.push_str("set title 'trace of the solution and obstacle'\n");
    if n == 1 {
        s.push_str("set xlabel 'x'\n");
        s.push_str("plot 'trace.csv' using 1:2 with lines title 'u', \\\n");
        s.push_str("     'trace.csv' using 1:3 with lines dashtype 2 title 'phi'\n");
    } else {
        s.push_str("set xlabel 'x1'\nset ylabel 'x2'\n");
        s.push_str("splot 'trace.csv' using 1:2:3 with points pointsize 0.3 title 'u', \\\n");
        s.push_str("      'trace.csv' using 1:2:4 with points pointsize 0.3 title 'phi'\n");
    }
    s
}

/// Frequency `N` and truncated frequency `Φ` against `r`, one curve per point.
pub fn radial_script(files: &[String]) -> String {
    let mut s = String::from(PREAMBLE);
    s.push_str("set logscale x\nset xlabel 'r'\nset multiplot layout 2,1\n");
    for (col, label) in [(9, "N(r)"), (10, "Phi(r)")] {
        s.push_str(&format!("set ylabel '{label}'\n"));
        if files.is_empty() {
            s.push_str("plot 0 notitle\n");
            continue;
        }
        let curves: Vec<String> = files
            .iter()
            .map(|f| format!("'{f}' using 1:{col} with linespoints title '{f}'"))
            .collect();
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    }
    s.push_str("unset multiplot\n");
    s
}

pub fn sweep_script(param: &str) -> String {
    let mut s = String::from(PREAMBLE);
    s.push_str(&format!("set xlabel '{param}'\nset ylabel 'contact measure'\n"));
    s.push_str("plot 'sweep.csv' using 1:3 with linespoints title 'contact measure'\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_script_lists_every_file() {
        let s = radial_script(&["point_0.csv".into(), "point_1.csv".into()]);
        assert_eq!(s.matches("point_0.csv").count(), 4);
        assert!(s.contains("using 1:10"));
        assert!(radial_script(&[]).contains("plot 0 notitle"));
    }
}
