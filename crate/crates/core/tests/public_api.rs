use ergodesc::descriptors::{compute_descriptor, AnalysisParams};
use ergodesc::ergodicity::eb_descriptor;
use ergodesc::io;
use ergodesc::noise::{gen_pink, shuffle, unsign};
use ergodesc::Descriptor;

#[test]
fn generate_describe_and_round_trip() {
    let params = AnalysisParams::default();
    let series: Vec<_> = (0..4).map(|s| unsign(&gen_pink(2000, s).unwrap())).collect();

    let back = io::parse_series_csv(&String::from_utf8(io::series_csv(&series[0])).unwrap()).unwrap();
    assert_eq!(back.values(), series[0].values());
    assert_eq!(back.meta(), series[0].meta());

    for d in [Descriptor::Rms, Descriptor::Hfgn, Descriptor::DeltaAlpha] {
        let table: Vec<_> = series
            .iter()
            .enumerate()
            .map(|(i, s)| compute_descriptor(s, 250, d, &params, i as u64).unwrap())
            .collect();
        for t in &table {
            assert_eq!(t.values.len(), 8);
            let text = String::from_utf8(io::descriptor_csv(t)).unwrap();
            let parsed = io::parse_descriptor_csv(&text).unwrap();
            assert_eq!(
                parsed.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        let curve = eb_descriptor(&table, 2).unwrap();
        let text = String::from_utf8(io::eb_csv(&curve)).unwrap();
        assert_eq!(io::parse_eb_csv(&text).unwrap(), curve);
    }
}

#[test]
fn shuffle_then_unsign_commutes() {
    let x = gen_pink(512, 9).unwrap();
    assert_eq!(unsign(&shuffle(&x, 4)).values(), shuffle(&unsign(&x), 4).values());
}
