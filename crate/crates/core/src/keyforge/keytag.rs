/// Key tag over DNSKEY rdata (RFC 4034 Appendix B).
///
/// Even-offset octets are the high byte of a 16-bit word; an odd trailing
/// octet is shifted left by 8. The 32-bit accumulator's upper half is folded
/// back once and the result masked to 16 bits.
pub fn compute_keytag(rdata: &[u8]) -> u16 {
    let mut acc: u32 = 0;
    for (i, &b) in rdata.iter().enumerate() {
        acc += if i & 1 == 0 { (b as u32) << 8 } else { b as u32 };
    }
    acc += (acc >> 16) & 0xFFFF;
    (acc & 0xFFFF) as u16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(compute_keytag(&[]), 0);
        assert_eq!(compute_keytag(&[0, 0, 0, 0]), 0);
        assert_eq!(compute_keytag(&[0x00, 0x01, 0x00, 0x02]), 3);
        assert_eq!(compute_keytag(&[0x01]), 0x0100);
    }

    #[test]
    fn carry_folds_once() {
        // 0xFFFF + 0x0002 = 0x10001 -> 0x0001 + 0x0001
        assert_eq!(compute_keytag(&[0xFF, 0xFF, 0x00, 0x02]), 2);
    }

    #[test]
    fn rfc4034_example_key() {
        // DNSKEY from RFC 4034 section 5.4 (dskey.example.com), tag 60485.
        use base64::Engine;
        let key = base64::engine::general_purpose::STANDARD
            .decode(
                "AQOeiiR0GOMYkDshWoSKz9XzfwJr1AYtsmx3TGkJaNXVbfi/2pHm822aJ5iI9BMzNXxeYCmZDRD99WYwYqUSdjMmmAphXdvxegXd/M5+X7OrzKBaMbCVdFLUUh6DhweJBjEVv5f2wwjM9XzcnOf+EPbtG9DMBmADjFDc2w/rljwvFw==",
            )
            .unwrap();
        let mut rdata = vec![0x01, 0x00, 3, 5];
        rdata.extend_from_slice(&key);
        assert_eq!(compute_keytag(&rdata), 60485);
    }
}
