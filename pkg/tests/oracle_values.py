"""Reference values frozen from 40-digit mpmath evaluations.

j_l(x) = sqrt(pi / (2x)) J_{l+1/2}(x); roots from mpmath.besseljzero(l + 1/2, n).
"""

SPHERICAL_BESSEL = {
    (0, 0.01): 0.9999833334166665,
    (0, 0.3): 0.9850673555377986,
    (0, 0.5): 0.958851077208406,
    (0, 0.9): 0.870363232919426,
    (0, 1.0): 0.8414709848078965,
    (0, 2.5): 0.2393888576415826,
    (0, 4.0): -0.18920062382698205,
    (0, 7.3): 0.11649816720939239,
    (0, 15.0): 0.043352522677141125,
    (0, 33.3): 0.02856843059419768,
    (0, 50.0): -0.005247497074078576,
    (1, 0.01): 0.0033333000001190475,
    (1, 0.3): 0.09910288804064188,
    (1, 0.5): 0.16253703063606656,
    (1, 0.9): 0.2763925162764017,
    (1, 1.0): 0.3011686789397568,
    (1, 2.5): 0.4162129892754065,
    (1, 4.0): 0.11611074925915746,
    (1, 7.3): -0.05610676029749492,
    (1, 15.0): 0.05353602903573083,
    (1, 33.3): 0.010112503039498644,
    (1, 50.0): -0.01940427051132384,
    (2, 0.01): 6.6666190477513225e-06,
    (2, 0.3): 0.005961524868620218,
    (2, 0.5): 0.016371106607993412,
    (2, 0.9): 0.050945154668579684,
    (2, 1.0): 0.06203505201137386,
    (2, 2.5): 0.26006672948890525,
    (2, 4.0): 0.27628368577135015,
    (2, 7.3): -0.1395557399343903,
    (2, 15.0): -0.03264531686999496,
    (2, 33.3): -0.027657394284332937,
    (2, 50.0): 0.004083240843399146,
    (3, 0.01): 9.523756613876865e-09,
    (3, 0.3): 0.0002558597696950818,
    (3, 0.5): 0.0011740354438675572,
    (3, 0.9): 0.0066361207712632,
    (3, 1.0): 0.009006581117112515,
    (3, 2.5): 0.10392046970240394,
    (3, 4.0): 0.22924385795503024,
    (3, 7.3): -0.03947936294523816,
    (3, 15.0): -0.06441780132572915,
    (3, 33.3): -0.01426526494405314,
    (3, 50.0): 0.01981259459566375,
    (4, 0.01): 1.0581962482054983e-11,
    (4, 0.3): 8.536424265025156e-06,
    (4, 0.5): 6.538960615238971e-05,
    (4, 0.9): 0.000669117996800759,
    (4, 1.0): 0.0010110158084137527,
    (4, 2.5): 0.0309105856778258,
    (4, 4.0): 0.12489306564995276,
    (4, 7.3): 0.10169881656224412,
    (4, 15.0): 0.0025836762513213574,
    (4, 33.3): 0.024658689941739184,
    (4, 50.0): -0.0013094776000062204,
    (5, 0.01): 9.619972620034288e-15,
    (5, 0.3): 2.3295825567290273e-07,
    (5, 0.5): 2.9774668754574457e-06,
    (5, 0.9): 5.5059196744390164e-05,
    (5, 1.0): 9.256115861125816e-05,
    (5, 2.5): 0.007357638737768936,
    (5, 4.0): 0.05176553975736346,
    (5, 7.3): 0.16486146555622408,
    (5, 15.0): 0.06596800707652196,
    (5, 33.3): 0.020929775739117785,
    (5, 50.0): -0.02004830056366487,
    (6, 0.01): 7.399982733352343e-18,
    (6, 0.3): 5.3784429812770125e-09,
    (6, 0.5): 1.1466510767409421e-07,
    (6, 0.9): 3.827741186231817e-06,
    (6, 1.0): 7.156936310087086e-06,
    (6, 2.5): 0.0014630247683575207,
    (6, 4.0): 0.017462168682796764,
    (6, 7.3): 0.1467225698923401,
    (6, 15.0): 0.04579286227146141,
    (6, 33.3): -0.017744950208096674,
    (6, 50.0): -0.0031011485240000514,
    (7, 0.01): 4.933323756872261e-21,
    (7, 0.3): 1.0760684910114974e-10,
    (7, 0.5): 3.825924069003847e-09,
    (7, 0.9): 2.303981678471929e-07,
    (7, 1.0): 4.790134198739489e-07,
    (7, 2.5): 0.0002500900576901717,
    (7, 4.0): 0.004986508461726022,
    (7, 7.3): 0.09642530274520351,
    (7, 15.0): -0.026280859774588737,
    (7, 33.3): -0.027857233778314686,
    (7, 50.0): 0.01924200194742486,
}

BESSEL_ROOTS = [
    [3.141592653589793, 6.283185307179586, 9.42477796076938, 12.566370614359172, 15.707963267948966, 18.84955592153876],
    [4.493409457909064, 7.725251836937707, 10.904121659428899, 14.066193912831473, 17.22075527193077, 20.37130295928756],
    [5.76345919689455, 9.095011330476355, 12.322940970566583, 15.514603010886749, 18.689036355362823, 21.853874222709766],
    [6.98793200050052, 10.417118547379365, 13.698023153249249, 16.92362128521384, 20.12180617445382, 23.304246988939653],
    [8.182561452571242, 11.70490715457039, 15.03966470761652, 18.30125595954199, 21.525417733399944, 24.727565547835034],
    [9.355812111042747, 12.966530172774345, 16.354709639350464, 19.653152101821185, 22.904550647903722, 26.127750137225505],
    [10.512835408093999, 14.20739245884246, 17.647974870165896, 20.98346306894477, 24.262768042397006, 27.50786836490425],
    [11.657032192516372, 15.431289210268378, 18.922999198546147, 22.295348019130767, 25.602855953810646, 28.87037334704266],
]
