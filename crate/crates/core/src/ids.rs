//! Identifier newtypes. Each prints and parses as a one-letter prefix plus a
//! number (`s1`, `p2`, `m3`, `e4`, `port5`, `h6`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident, $repr:ty, $prefix:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub $repr);

        impl $name {
            pub const PREFIX: &'static str = $prefix;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                s.strip_prefix($prefix)
                    .and_then(|n| n.parse::<$repr>().ok())
                    .map($name)
                    .ok_or_else(|| format!("expected `{}<number>`, got `{}`", $prefix, s))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

id_type!(SwitchId, u8, "s");
id_type!(PacketId, u8, "p");
id_type!(MsgId, u8, "m");
id_type!(EntryId, u8, "e");
id_type!(
    /// A port (output action) token.
    PortId,
    u8,
    "port"
);
id_type!(
    /// Opaque, comparable header token.
    Header,
    u16,
    "h"
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        assert_eq!("s3".parse::<SwitchId>().unwrap(), SwitchId(3));
        assert_eq!(PortId(2).to_string(), "port2");
        assert_eq!("port2".parse::<PortId>().unwrap(), PortId(2));
        assert!("p1".parse::<SwitchId>().is_err());
        assert!("s".parse::<SwitchId>().is_err());
        assert_eq!(serde_json::to_string(&Header(9)).unwrap(), "\"h9\"");
    }
}
