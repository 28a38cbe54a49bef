//! C ABI for the srn library. Placeholder; filled in alongside the header.

#[no_mangle]
pub extern "C" fn srn_abi_version() -> u32 {
    1
}
