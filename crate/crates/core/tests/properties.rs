mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sbe_core::symvec::{sign_mask, unvec_s, vec_s};
use sbe_core::{min_norm_solve, validate_case, BlockSystem, StructureCase};

fn case_strategy() -> impl Strategy<Value = StructureCase> {
    prop_oneof![Just(StructureCase::CaseI), Just(StructureCase::CaseII), Just(StructureCase::CaseIII)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn operator_identities(seed in any::<u64>(), case in case_strategy()) {
        let inst = random_instance(&mut rng(seed), case);
        prop_assert!(check_operator_identities(&inst).is_ok(), "{:?}", check_operator_identities(&inst));
    }

    #[test]
    fn backward_error_properties(seed in any::<u64>(), case in case_strategy()) {
        let inst = random_instance(&mut rng(seed), case);
        let res = check_backward_errors(&inst);
        prop_assert!(res.is_ok(), "{:?}", res);
    }

    #[test]
    fn assembly_properties(seed in any::<u64>(), case in case_strategy()) {
        let inst = random_instance(&mut rng(seed), case);
        let res = check_assembly(&inst);
        prop_assert!(res.is_ok(), "{:?}", res);
    }

    #[test]
    fn validate_case_ignores_transposing_symmetric_blocks(seed in any::<u64>(), case in case_strategy()) {
        let inst = random_instance(&mut rng(seed), case);
        let s = &inst.sys;
        let a = if case.a_symmetric() { s.a().transpose() } else { s.a().clone() };
        let t = BlockSystem::new(a, s.b1().clone(), s.b2().clone(), s.c().transpose(), s.d1().clone(), s.d2().clone(),
            s.e().transpose(), s.f().clone(), s.g().clone(), s.h().clone()).unwrap();
        prop_assert!(validate_case(&t, case));
    }

    #[test]
    fn wide_random_matrix_matches_svd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let j = random_matrix(&mut r, 8, 20, 0.0);
        let rhs = random_vector(&mut r, 8);
        let s = min_norm_solve(&j, &rhs).unwrap();
        prop_assert!(rel_err(&s.dx, &svd_min_norm(&j, &rhs)) <= 1e-10);
    }

    #[test]
    fn sym_roundtrip_and_mask(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let x = random_symmetric(&mut r, n, 0.3);
        prop_assert_eq!(unvec_s(&vec_s(&x).unwrap(), n).unwrap(), x.clone());
        prop_assert_eq!(sign_mask(&x).hadamard(&x), x);
    }
}

#[test]
fn exact_dense_solve_has_small_residual() {
    let mut r = rng(11);
    for case in StructureCase::ALL {
        for _ in 0..20 {
            let inst = random_instance(&mut r, case);
            let mut sys = inst.sys.clone();
            // shift the diagonal so the monolithic matrix is comfortably nonsingular
            let shift = DMatrix::<f64>::identity(sys.n(), sys.n()) * 10.0;
            sys = BlockSystem::new(sys.a() + shift, sys.b1().clone(), sys.b2().clone(), sys.c() - DMatrix::identity(sys.m(), sys.m()) * 10.0,
                sys.d1().clone(), sys.d2().clone(), sys.e() + DMatrix::identity(sys.p(), sys.p()) * 10.0,
                sys.f().clone(), sys.g().clone(), sys.h().clone()).unwrap();
            let sol = sbe_core::solvers::gep_solve(&sys).unwrap();
            let res = sbe_core::residuals(&sys, &sol).unwrap().norm();
            let bound = 1e-12 * sbe_core::be::problem_scale(&sys, &sol);
            assert!(res <= bound, "{res:e} > {bound:e}");
            let _ = DVector::<f64>::zeros(0);
        }
    }
}
