use qnipm::checks::ALL_CHECKS;
use qnipm::faults::run_catalogue;

#[test]
fn every_check_catches_its_corruption() {
    let outcomes = run_catalogue().unwrap();
    for name in ALL_CHECKS {
        let o = outcomes.iter().find(|o| o.check == name).unwrap_or_else(|| panic!("no corruption for {name}"));
        assert!(o.clean_passed, "{name} is not evaluated cleanly on its baseline");
        assert!(o.caught, "{name} missed its corruption");
    }
    assert_eq!(outcomes.len(), ALL_CHECKS.len());
}
