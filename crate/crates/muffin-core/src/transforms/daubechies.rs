//! Daubechies scaling filters db1..db8 (extremal-phase spectral factor),
//! generated offline at 60-digit precision and rounded to f64; each rounded
//! filter satisfies the orthonormality conditions to ≤ 3e-16. The test suite
//! re-verifies them. Order: h[0..2p], detail filter g[m] = (−1)^m h[2p−1−m].

pub(super) const DB1: [f64; 2] = [0.7071067811865475244, 0.7071067811865475244];

pub(super) const DB2: [f64; 4] = [
    -0.1294095225512603812,
    0.2241438680420133810,
    0.8365163037378079056,
    0.4829629131445341434,
];

pub(super) const DB3: [f64; 6] = [
    0.03522629188570953660,
    -0.08544127388202666169,
    -0.1350110200102545887,
    0.4598775021184915701,
    0.8068915093110925765,
    0.3326705529500826160,
];

pub(super) const DB4: [f64; 8] = [
    -0.01059740178506903210,
    0.03288301166688519974,
    0.03084138183556076363,
    -0.1870348117190930841,
    -0.02798376941685985421,
    0.6308807679298589079,
    0.7148465705529156471,
    0.2303778133088965009,
];

pub(super) const DB5: [f64; 10] = [
    0.003335725285473771278,
    -0.01258075199908199947,
    -0.006241490212798274274,
    0.07757149384004571352,
    -0.03224486958463837465,
    -0.2422948870663820319,
    0.1384281459013207315,
    0.7243085284377729277,
    0.6038292697971896705,
    0.1601023979741929145,
];

pub(super) const DB6: [f64; 12] = [
    -0.001077301085308479565,
    0.004777257510945510640,
    0.0005538422011614961393,
    -0.03158203931748602957,
    0.02752286553030572863,
    0.09750160558732304910,
    -0.1297668675672619356,
    -0.2262646939654398201,
    0.3152503517091976291,
    0.7511339080210953507,
    0.4946238903984530857,
    0.1115407433501094636,
];

pub(super) const DB7: [f64; 14] = [
    0.0003537137999745202484,
    -0.001801640704047490915,
    0.0004295779729213665211,
    0.01255099855609984061,
    -0.01657454163066688065,
    -0.03802993693501441358,
    0.08061260915108307191,
    0.07130921926683026475,
    -0.2240361849938749826,
    -0.1439060039285649754,
    0.4697822874051931225,
    0.7291320908462351199,
    0.3965393194819173065,
    0.07785205408500917902,
];

pub(super) const DB8: [f64; 16] = [
    -0.0001174767841247695337,
    0.0006754494064505693664,
    -0.0003917403733769470463,
    -0.004870352993451574310,
    0.008746094047405776716,
    0.01398102791739828165,
    -0.04408825393079475151,
    -0.01736930100180754617,
    0.1287474266204784589,
    0.0004724845739132827704,
    -0.2840155429615469265,
    -0.01582910525634930567,
    0.5853546836542067128,
    0.6756307362972898068,
    0.3128715909142999707,
    0.05441584224310400996,
];

pub(super) fn scaling_filter(p: usize) -> &'static [f64] {
    match p {
        1 => &DB1,
        2 => &DB2,
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        _ => panic!("Daubechies family covers db1..db8, got db{p}"),
    }
}
