#pragma once

// Metric fixtures with expected values computed by a separate script from the
// definitions (decade hit rate, mean squared normalized error, R^2 on
// normalized values), not by the library.

#include <optional>
#include <vector>

namespace tactile::testing {

struct MetricCase {
    std::vector<double> preds_pa;
    std::vector<double> truths_pa;
    double log10_accuracy;
    double n_mse;
    std::optional<double> r_squared;
};

inline const std::vector<MetricCase>& metric_cases() {
    static const std::vector<MetricCase> cases{
        {{1000000.0}, {1000000.0}, 1.0, 0.0, std::nullopt},
        {{10000000.0}, {1000000.0}, 1.0, 0.012345679012345678, std::nullopt},
        {{11000000.0}, {1000000.0}, 0.0, 0.01338887314445752, std::nullopt},
        {{100000.0}, {1000000.0}, 1.0, 0.012345679012345678, std::nullopt},
        {{100000.0, 100000000.0}, {1000000.0, 1000000.0}, 0.5, 0.030864197530864206, std::nullopt},
        {{1000000000000.0}, {1000.0}, 0.0, 1.0, std::nullopt},
        {{30000.0, 300000.0, 250000000.0}, {300000.0, 30000.0, 25000000.0}, 1.0, 0.012345679012345684, 0.3192507429895767},
        {{1000.0, 1000000000000.0}, {1000000000000.0, 1000.0}, 0.0, 1.0, -3.0},
        {{500000.0, 2000000.0, 4000000.0}, {1000000.0, 1000000.0, 1000000.0}, 1.0, 0.0022375076120853495, std::nullopt},
        {{10000.0, 100000.0, 1000000.0, 10000000.0}, {10000.0, 100000.0, 1000000.0, 10000000.0}, 1.0, 0.0, 1.0},
        {{23460.5, 172242000.0, 366623.0, 144753000.0, 5408340000.0, 776178000.0, 1159130.0, 4860470000.0, 70852100000.0}, {89876.9, 133913000.0, 126361.0, 1941420000.0, 3611910000.0, 3706870000.0, 58269800.0, 388314000.0, 2409560000.0}, 0.5555555555555556, 0.011775701434263671, 0.6765955270310144},
        {{628973000000.0, 510386000.0, 106815000.0, 11917100.0, 411456000000.0, 43205600000.0, 2104010000.0, 631135000.0, 703431000.0}, {78952300000.0, 14191700000.0, 525006000.0, 56606500.0, 27522600000.0, 215580000000.0, 4629270000.0, 338352000.0, 16867500.0}, 0.6666666666666666, 0.011682512212528797, 0.4791528536379017},
        {{3550990.0, 3221.76, 5622.07, 115009.0, 70810000000.0, 1493070000.0, 108177000.0, 44219100000.0}, {215191.0, 6666.48, 200335.0, 4522.37, 26503200000.0, 17851300000.0, 1131860.0, 152324000000.0}, 0.375, 0.017776347142574547, 0.8296519805549499},
        {{619781.0, 1253160000.0, 2375750000.0, 10975000.0, 1680530000.0}, {2819900.0, 183610000.0, 334800000.0, 393970.0, 308424000.0}, 0.8, 0.011068926734055528, 0.3888471162509378},
        {{33785900.0, 1487.83, 39375100.0, 125686.0}, {1427270.0, 142983.0, 983073000.0, 19227.6}, 0.25, 0.026040648892201222, 0.3278206019612444},
        {{963447.0, 53063.2, 13958500.0, 184432000.0, 26750800.0, 41164900.0, 289406000000.0}, {212990.0, 116191.0, 594189.0, 1149050000.0, 205890000.0, 22717900.0, 34376700000.0}, 0.8571428571428571, 0.0084027924316872, 0.8153169273935702},
        {{1079010.0, 266765.0, 6427630.0, 30948600.0, 143170000.0, 5755.69, 36304.1, 41904100.0, 164590000000.0, 5722100000.0}, {20178.7, 177620.0, 115751.0, 4062480.0, 41893200.0, 193150.0, 2172150.0, 1319360000.0, 7910860000.0, 135167000.0}, 0.3, 0.023749499387591334, 0.3913155868763427},
        {{203128000000.0, 1557080000.0, 2098.5, 1329610.0, 48382500000.0, 664.38, 2080.4, 14835000.0, 254851000.0, 4816770000.0, 49389900000.0}, {77706600000.0, 117923000000.0, 77637.5, 25374600.0, 7787960000.0, 66154.4, 15642.5, 276883000.0, 9796990000.0, 179210000.0, 9996660000.0}, 0.36363636363636365, 0.021512981919037753, 0.7000219986696097},
        {{88889200.0, 258755000.0, 112617000.0, 380075000.0, 191633.0}, {135925000.0, 453325000.0, 15410000.0, 19223100.0, 480458.0}, 0.8, 0.0066137302938586995, 0.4775452349557625},
        {{5638190000.0, 1848240.0, 2897.16, 159710.0, 4241290.0, 1682.1, 234133.0, 22952500.0, 6426.66}, {25689200000.0, 179914000.0, 37171.7, 149895.0, 984449.0, 118983.0, 86180.1, 13887600.0, 4160.37}, 0.6666666666666666, 0.013321335215643089, 0.7307161789946847},
        {{2053420.0, 300556.0}, {8964500.0, 3847.75}, 0.5, 0.02464225515750637, 0.2958634619228814},
        {{45417300000.0, 1968.49, 2734720.0, 5157.69, 449227000000.0, 907087.0}, {674233000.0, 57707.0, 216653000.0, 22904.5, 7302580000.0, 8870730.0}, 0.3333333333333333, 0.028192396552729992, 0.45439519934125194},
        {{511154.0, 239497.0, 286536.0, 7747980.0}, {2530370.0, 16988600.0, 9350700.0, 27258600.0}, 0.5, 0.020055028331193596, -9.842701002978705},
        {{300154000000.0, 18522600.0, 1084610.0, 3985550000.0, 5138590000.0, 16500800000.0, 471967000000.0, 27872400.0, 31501.4, 4390700.0, 150912000.0, 67091.6}, {138712000000.0, 34847800.0, 18288.5, 598539000.0, 44366600000.0, 9595160000.0, 41564000000.0, 486831.0, 27610.5, 70349600.0, 108957000.0, 158075.0}, 0.6666666666666666, 0.011067867025946912, 0.8419363646876763},
    };
    return cases;
}

}  // namespace tactile::testing
