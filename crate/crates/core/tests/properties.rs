mod support;

#[test]
fn pairing_with_lift_is_evaluation() {
    support::pairing_is_evaluation().unwrap();
}

#[test]
fn localizing_template_at_a_lift() {
    support::localizing_at_lift().unwrap();
}

#[test]
fn relaxation_values_increase_and_stay_below_feasible_points() {
    support::hierarchy_bounds().unwrap();
}

#[test]
fn extraction_recovers_atoms() {
    support::extraction_round_trip().unwrap();
}

#[test]
fn catalog_lmes_verify() {
    support::catalog_lmes_verify().unwrap();
}

#[test]
fn degree_bound_matches_enumeration() {
    support::degree_bound_enumeration().unwrap();
}

#[test]
fn toy_sdps_and_infeasibility_certificates() {
    support::sdp_backend_toys().unwrap();
}
