"""
CTCP Receiver - Decoding, Per-Packet ACKs and In-Order Delivery
"""

import logging
from typing import Dict, List, Optional

from execution.field_codec import DecoderState, coeff_vector, unit_vector
from execution.wire import UNBOUNDED_STREAM, Ack, Packet, StreamHeader

logger = logging.getLogger(__name__)


class CtcpReceiver:
    """
    Receiver state for one connection.

    Decoders exist only for blocks in [ack_currblk, ack_currblk + numblks - 1];
    packets outside that window are acknowledged and dropped.
    """

    def __init__(self, numblks: int = 2, stream_length: Optional[int] = None):
        if numblks < 1:
            raise ValueError(f"numblks must be >= 1, got {numblks}")
        self.numblks = numblks
        self.stream_length = stream_length
        self.payload_size: Optional[int] = None

        self.ack_currblk = 0
        self.ack_currdof = 0
        self.decoders: Dict[int, DecoderState] = {}
        self.delivered = 0

        self._decoded: Dict[int, List[bytes]] = {}
        self._delivered_bytes = 0

        self.packets_received = 0
        self.innovative = 0
        self.non_innovative = 0
        self.out_of_window = 0
        self.delivered_packets = 0

    def on_stream_header(self, header: StreamHeader):
        """Record what the sender announced at connection start."""
        self.stream_length = None if header.stream_length == UNBOUNDED_STREAM else header.stream_length
        self.payload_size = header.payload_size
        self.numblks = header.numblks
        logger.debug(f"Stream header: length={self.stream_length}, payload={self.payload_size}")

    @property
    def complete(self) -> bool:
        return self.stream_length is not None and self._delivered_bytes >= self.stream_length

    @property
    def delivered_bytes(self) -> int:
        return self._delivered_bytes

    def _ack(self, seqno: int) -> Ack:
        return Ack(self.ack_currblk, self.ack_currdof, seqno)

    def _advance(self):
        """Move past every leading block that has reached full rank."""
        while True:
            decoder = self.decoders.get(self.ack_currblk)
            if decoder is None or not decoder.decodable:
                break
            self._decoded[self.ack_currblk] = decoder.decode()
            del self.decoders[self.ack_currblk]
            self.ack_currblk += 1
        current = self.decoders.get(self.ack_currblk)
        self.ack_currdof = current.rank if current else 0

    def on_packet(self, pkt: Packet) -> Ack:
        """Insert a packet into its block's decoder; always answer with one ACK."""
        self.packets_received += 1
        block_no = pkt.block_no

        if block_no < self.ack_currblk:
            self.non_innovative += 1
            return self._ack(pkt.seqno)
        if block_no >= self.ack_currblk + self.numblks:
            self.out_of_window += 1
            logger.debug(f"Dropping packet {pkt.seqno} for out-of-window block {block_no}")
            return self._ack(pkt.seqno)

        decoder = self.decoders.get(block_no)
        if decoder is None:
            decoder = DecoderState(pkt.blk_len, len(pkt.payload))
            self.decoders[block_no] = decoder
        elif decoder.blk_len != pkt.blk_len or decoder.payload_size != len(pkt.payload):
            logger.warning(f"Packet {pkt.seqno} disagrees with block {block_no} geometry; dropped")
            return self._ack(pkt.seqno)

        if pkt.systematic:
            vector = unit_vector(pkt.sys_index, pkt.blk_len)
        else:
            vector = coeff_vector(pkt.seed, pkt.blk_len)

        result = decoder.insert(vector, pkt.payload)
        if result.innovative:
            self.innovative += 1
        else:
            self.non_innovative += 1

        if block_no == self.ack_currblk:
            self.ack_currdof = result.rank
            if decoder.decodable:
                self._advance()
        return self._ack(pkt.seqno)

    def deliver(self) -> bytes:
        """Decoded blocks not yet delivered, in order, with stream padding removed."""
        chunks = []
        while self.delivered in self._decoded:
            payloads = self._decoded.pop(self.delivered)
            self.delivered += 1
            self.delivered_packets += len(payloads)
            data = b"".join(payloads)
            if self.stream_length is not None:
                data = data[:max(self.stream_length - self._delivered_bytes, 0)]
            self._delivered_bytes += len(data)
            chunks.append(data)
        return b"".join(chunks)
