//! Ledger events: the onchain surface that offchain workers observe.

use std::fmt::Write as _;

use crate::codec::{Address, EndpointId, Guid, Hash32, Packet, Path};
use crate::ids::{LibVersion, WorkerId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEvent {
    LibraryRegistered {
        lib: LibVersion,
        kind: String,
    },
    StackConfigured {
        oapp: Address,
        remote: EndpointId,
        detail: String,
    },
    PacketSent {
        packet: Packet,
        options: Vec<u8>,
        send_library: LibVersion,
        dvns: Vec<WorkerId>,
        executor: WorkerId,
        fee: u128,
    },
    PayloadAttested {
        lib: LibVersion,
        dvn: WorkerId,
        nonce: u64,
        header_hash: Hash32,
        payload_hash: Hash32,
    },
    PayloadVerified {
        lib: LibVersion,
        path: Path,
        nonce: u64,
        hash: Hash32,
    },
    PacketDelivered {
        path: Path,
        nonce: u64,
        guid: Guid,
    },
    PacketCleared {
        path: Path,
        nonce: u64,
        guid: Guid,
    },
    PacketSkipped {
        path: Path,
        nonce: u64,
    },
    PacketNilified {
        path: Path,
        nonce: u64,
        hash: Hash32,
    },
    PacketBurnt {
        path: Path,
        nonce: u64,
        hash: Hash32,
    },
    ComposeSent {
        from: Address,
        to: Address,
        guid: Guid,
        index: u16,
        hash: Hash32,
        message: Vec<u8>,
    },
    ComposeDelivered {
        from: Address,
        to: Address,
        guid: Guid,
        index: u16,
    },
    NativeDropped {
        to: Address,
        amount: u128,
    },
    /// Application-level state change (bridge lock/mint, swap).
    App {
        app: Address,
        action: &'static str,
        amount: u128,
    },
    /// A transaction whose effects were rolled back.
    TxReverted {
        call: &'static str,
        reason: String,
    },
}

impl LedgerEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LedgerEvent::LibraryRegistered { .. } => "LibraryRegistered",
            LedgerEvent::StackConfigured { .. } => "StackConfigured",
            LedgerEvent::PacketSent { .. } => "PacketSent",
            LedgerEvent::PayloadAttested { .. } => "PayloadAttested",
            LedgerEvent::PayloadVerified { .. } => "PayloadVerified",
            LedgerEvent::PacketDelivered { .. } => "PacketDelivered",
            LedgerEvent::PacketCleared { .. } => "PacketCleared",
            LedgerEvent::PacketSkipped { .. } => "PacketSkipped",
            LedgerEvent::PacketNilified { .. } => "PacketNilified",
            LedgerEvent::PacketBurnt { .. } => "PacketBurnt",
            LedgerEvent::ComposeSent { .. } => "ComposeSent",
            LedgerEvent::ComposeDelivered { .. } => "ComposeDelivered",
            LedgerEvent::NativeDropped { .. } => "NativeDropped",
            LedgerEvent::App { .. } => "App",
            LedgerEvent::TxReverted { .. } => "TxReverted",
        }
    }

    /// `k=v` pairs, in a fixed order, for the line-oriented trace.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        fn path_fields(out: &mut Vec<(&'static str, String)>, path: &Path) {
            out.push(("src", path.src_eid.to_string()));
            out.push(("sender", path.sender.to_string()));
            out.push(("dst", path.dst_eid.to_string()));
            out.push(("receiver", path.receiver.to_string()));
        }
        let mut out = Vec::new();
        match self {
            LedgerEvent::LibraryRegistered { lib, kind } => {
                out.push(("lib", lib.to_string()));
                out.push(("kind", kind.clone()));
            }
            LedgerEvent::StackConfigured { oapp, remote, detail } => {
                out.push(("oapp", oapp.to_string()));
                out.push(("remote", remote.to_string()));
                out.push(("config", detail.clone()));
            }
            LedgerEvent::PacketSent { packet, options, send_library, dvns, executor, fee } => {
                out.push(("nonce", packet.header.nonce.to_string()));
                out.push(("version", packet.header.version.to_string()));
                path_fields(&mut out, &packet.header.path);
                out.push(("guid", packet.header.guid.to_string()));
                out.push(("lib", send_library.to_string()));
                let dvns: Vec<String> = dvns.iter().map(ToString::to_string).collect();
                out.push(("dvns", dvns.join(",")));
                out.push(("executor", executor.to_string()));
                out.push(("fee", fee.to_string()));
                out.push(("options", hex::encode(options)));
                out.push(("payload", hex::encode(&packet.payload)));
            }
            LedgerEvent::PayloadAttested { lib, dvn, nonce, header_hash, payload_hash } => {
                out.push(("lib", lib.to_string()));
                out.push(("dvn", dvn.to_string()));
                out.push(("nonce", nonce.to_string()));
                out.push(("headerHash", header_hash.to_string()));
                out.push(("payloadHash", payload_hash.to_string()));
            }
            LedgerEvent::PayloadVerified { lib, path, nonce, hash } => {
                out.push(("nonce", nonce.to_string()));
                path_fields(&mut out, path);
                out.push(("lib", lib.to_string()));
                out.push(("hash", hash.to_string()));
            }
            LedgerEvent::PacketDelivered { path, nonce, guid } | LedgerEvent::PacketCleared { path, nonce, guid } => {
                out.push(("nonce", nonce.to_string()));
                path_fields(&mut out, path);
                out.push(("guid", guid.to_string()));
            }
            LedgerEvent::PacketSkipped { path, nonce } => {
                out.push(("nonce", nonce.to_string()));
                path_fields(&mut out, path);
            }
            LedgerEvent::PacketNilified { path, nonce, hash } | LedgerEvent::PacketBurnt { path, nonce, hash } => {
                out.push(("nonce", nonce.to_string()));
                path_fields(&mut out, path);
                out.push(("hash", hash.to_string()));
            }
            LedgerEvent::ComposeSent { from, to, guid, index, hash, message } => {
                out.push(("from", from.to_string()));
                out.push(("to", to.to_string()));
                out.push(("guid", guid.to_string()));
                out.push(("index", index.to_string()));
                out.push(("hash", hash.to_string()));
                out.push(("message", hex::encode(message)));
            }
            LedgerEvent::ComposeDelivered { from, to, guid, index } => {
                out.push(("from", from.to_string()));
                out.push(("to", to.to_string()));
                out.push(("guid", guid.to_string()));
                out.push(("index", index.to_string()));
            }
            LedgerEvent::NativeDropped { to, amount } => {
                out.push(("to", to.to_string()));
                out.push(("amount", amount.to_string()));
            }
            LedgerEvent::App { app, action, amount } => {
                out.push(("app", app.to_string()));
                out.push(("action", (*action).to_string()));
                out.push(("amount", amount.to_string()));
            }
            LedgerEvent::TxReverted { call, reason } => {
                out.push(("call", (*call).to_string()));
                out.push(("reason", reason.clone()));
            }
        }
        out
    }

    /// `height seq CHAIN=<eid> <EVENT_NAME> k=v ...`
    pub fn trace_line(&self, height: u64, seq: u64, chain: EndpointId) -> String {
        let mut line = format!("{height} {seq} CHAIN={chain} {}", self.name());
        for (k, v) in self.fields() {
            let _ = write!(line, " {k}={v}");
        }
        line
    }
}
