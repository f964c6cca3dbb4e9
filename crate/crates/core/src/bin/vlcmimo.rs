use std::io;

fn main() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("VLCMIMO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let code = vlcmimo::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
