fn main() {
    println!("curlfem scaffold");
}
