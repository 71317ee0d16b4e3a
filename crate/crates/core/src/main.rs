//! `nhthermo` command-line tool; see [`nhthermo::cli`].

fn main() {
    std::process::exit(nhthermo::cli::run(std::env::args_os()));
}
