/// Disjoint-set forest whose representative is always the smallest index of
/// its set, so roots double as deterministic anchors.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(size: usize) -> Self {
        assert!(
            size <= u32::MAX as usize,
            "union-find limited to u32 indices"
        );
        UnionFind {
            parent: (0..size as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else {
            self.parent[ra as usize] = rb;
        }
        true
    }

    /// Dense labels `0..k` assigned in order of each set's smallest member.
    pub fn compact_labels(&mut self) -> (Vec<u32>, usize) {
        let n = self.parent.len();
        let mut labels = vec![u32::MAX; n];
        let mut next = 0u32;
        for i in 0..n as u32 {
            let r = self.find(i);
            if r == i {
                labels[i as usize] = next;
                next += 1;
            } else {
                labels[i as usize] = labels[r as usize];
            }
        }
        (labels, next as usize)
    }
}
