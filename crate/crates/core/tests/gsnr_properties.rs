mod common;

use optiagent::fixtures;

#[test]
fn two_hundred_routes_on_the_synthetic_plant() {
    let topo = fixtures::conus_topology();
    assert_eq!((topo.nodes.len(), topo.links.len()), (77, 99));
    let (n, longest) = common::gsnr_properties(200, 0x65).unwrap();
    assert_eq!(n, 200);
    assert!(longest >= 5);
}

#[test]
fn extending_a_route_never_raises_gsnr() {
    let topo = fixtures::conus_topology();
    let mut r = common::rng(8);
    for _ in 0..50 {
        let (route, launches) = common::random_route(&topo, &mut r);
        common::gsnr_route_check(&topo, &route, &launches).unwrap();
        let reversed: Vec<String> = route.iter().rev().cloned().collect();
        common::gsnr_route_check(&topo, &reversed, &launches).unwrap();
    }
}
