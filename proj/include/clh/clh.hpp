#pragma once

#include <clh/linalg.hpp>
#include <clh/model.hpp>
#include <clh/io.hpp>
#include <clh/graph.hpp>
#include <clh/algebra.hpp>
#include <clh/oracle.hpp>
#include <clh/isolation.hpp>
#include <clh/witness.hpp>
#include <clh/circuit.hpp>
#include <clh/generators.hpp>
#include <clh/report.hpp>
