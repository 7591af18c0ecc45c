fn main() {
    eprintln!("homog: not yet wired up");
    std::process::exit(1);
}
